"""SVR training, model files, correlation metrics, MOS screening, CV."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereocomfort import (
    ConvergenceError,
    DataError,
    DecodeError,
    DegenerateDataError,
    EvalReport,
    FormatError,
    InputError,
    Metrics,
    MosResult,
    ParameterError,
    RatedSample,
    SvrModel,
    SvrParams,
    correlation_metrics,
    cross_validate,
    load_model,
    mos_from_ratings,
    predict_svr,
    serialize_model,
    train_svr,
)
from stereocomfort.model import resolve_params


def linear_instance(n=20, dim=3, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim))
    w = np.arange(1, dim + 1, dtype=np.float64)
    y = X @ w + 0.5 + noise * rng.normal(size=n)
    return X, y


# --- params -------------------------------------------------------------------


def test_svr_params_validation():
    with pytest.raises(ParameterError):
        SvrParams(kernel="poly")
    with pytest.raises(ParameterError):
        SvrParams(C=0.0)
    with pytest.raises(ParameterError):
        SvrParams(epsilon=-0.1)
    with pytest.raises(ParameterError):
        SvrParams(gamma=0.0)
    with pytest.raises(ParameterError):
        SvrParams(tol=0.0)


def test_resolve_params_fills_gamma():
    p = resolve_params(SvrParams(), dim=4)
    assert p.gamma == 0.25
    q = resolve_params(SvrParams(gamma=2.0), dim=4)
    assert q.gamma == 2.0


# --- training -----------------------------------------------------------------


def test_constant_targets_need_no_support_vectors():
    X = np.random.default_rng(1).normal(size=(8, 2))
    model = train_svr(X, np.full(8, 3.25))
    assert model.n_sv == 0
    assert model.bias == pytest.approx(3.25, abs=1e-9)
    assert np.allclose(model.predict(X), 3.25)


def test_linear_kernel_fits_linear_data():
    X, y = linear_instance(n=24, dim=3, seed=2)
    params = SvrParams(kernel="linear", C=100.0, epsilon=0.05, tol=1e-4)
    model = train_svr(X, y, params)
    resid = np.abs(model.predict(X) - y)
    assert resid.max() <= params.epsilon + 10 * params.tol


def test_rbf_interpolates_clean_data():
    X, y = linear_instance(n=16, dim=2, seed=3)
    params = SvrParams(C=1000.0, epsilon=0.01, gamma=0.5, tol=1e-5)
    model = train_svr(X, y, params)
    resid = np.abs(model.predict(X) - y)
    assert resid.max() <= params.epsilon + 10 * params.tol


def test_dual_coefficients_stay_feasible():
    X, y = linear_instance(n=30, dim=4, seed=4, noise=0.5)
    params = SvrParams(C=2.0, epsilon=0.1)
    model = train_svr(X, y, params)
    assert np.all(np.abs(model.coefficients) <= params.C + 1e-12)
    assert abs(model.coefficients.sum()) <= params.tol
    assert math.isfinite(model.dual_objective)
    assert model.iterations > 0


def test_iteration_budget_raises_convergence_error():
    X, y = linear_instance(n=30, dim=4, seed=5, noise=0.3)
    with pytest.raises(ConvergenceError) as exc_info:
        train_svr(X, y, SvrParams(tol=1e-10, max_iter=3))
    assert exc_info.value.iterations == 3
    assert exc_info.value.kkt_violation > 1e-10


def test_training_input_validation():
    with pytest.raises(InputError):
        train_svr(np.zeros((1, 2)), np.zeros(1))
    with pytest.raises(InputError):
        train_svr(np.zeros((4, 2)), np.zeros(3))
    with pytest.raises(DataError):
        train_svr(np.full((4, 2), np.nan), np.zeros(4))


def test_predict_validation():
    X, y = linear_instance(n=10, dim=2, seed=6)
    model = train_svr(X, y)
    with pytest.raises(InputError):
        model.predict(np.zeros((2, 3)))
    with pytest.raises(DataError):
        model.predict(np.array([[np.inf, 0.0]]))
    assert predict_svr(model, X).shape == (10,)


def test_constant_feature_column_survives_normalization():
    X, y = linear_instance(n=12, dim=2, seed=7)
    X = np.hstack([X, np.full((12, 1), 5.0)])  # zero-variance column
    model = train_svr(X, y)
    assert np.all(np.isfinite(model.predict(X)))


# --- serialization --------------------------------------------------------


def test_model_file_round_trip_bit_exact(tmp_path):
    X, y = linear_instance(n=18, dim=3, seed=8, noise=0.2)
    model = train_svr(X, y, SvrParams(C=5.0, epsilon=0.05))
    path = tmp_path / "model.svr"
    serialize_model(model, path)
    back = load_model(path)
    assert back.kernel == model.kernel
    assert back.gamma == model.gamma
    assert np.array_equal(back.support_vectors, model.support_vectors)
    assert np.array_equal(back.coefficients, model.coefficients)
    Xq = np.random.default_rng(9).normal(size=(7, 3))
    assert np.array_equal(back.predict(Xq), model.predict(Xq))
    # the file is line-oriented text with a magic header
    first = path.read_text().splitlines()[0]
    assert first == "VCASIR-MODEL v1"


def test_model_file_rejects_wrong_magic(tmp_path):
    X, y = linear_instance(n=10, dim=2, seed=10)
    path = tmp_path / "model.svr"
    serialize_model(train_svr(X, y), path)
    text = path.read_text().replace("VCASIR-MODEL v1", "VCASIR-MODEL v9")
    path.write_text(text)
    with pytest.raises(FormatError):
        load_model(path)


def test_model_file_rejects_corrupt_payload(tmp_path):
    X, y = linear_instance(n=10, dim=2, seed=11, noise=0.3)
    path = tmp_path / "model.svr"
    serialize_model(train_svr(X, y, SvrParams(C=1.0, epsilon=0.01)), path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")  # drop one SV line
    with pytest.raises(DecodeError):
        load_model(path)
    path.write_text("\n".join(lines).replace(".", "x", 3))
    with pytest.raises(DecodeError):
        load_model(path)


# --- metrics ------------------------------------------------------------------


def test_metrics_perfect_and_reversed():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    m = correlation_metrics(a, a)
    assert m == Metrics(plcc=1.0, srcc=1.0, krcc=1.0, rmse=0.0)
    r = correlation_metrics(a[::-1], a)
    assert (r.plcc, r.srcc, r.krcc) == (-1.0, -1.0, -1.0)


def test_metrics_monotone_nonlinear_relation():
    x = np.linspace(0.1, 3.0, 12)
    m = correlation_metrics(np.exp(x), x)
    assert m.srcc == 1.0 and m.krcc == pytest.approx(1.0, abs=1e-12)
    assert m.plcc < 1.0


def test_metrics_degenerate_carries_rmse():
    with pytest.raises(DegenerateDataError) as exc_info:
        correlation_metrics([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    assert exc_info.value.rmse == pytest.approx(math.sqrt((1 + 0 + 1) / 3))


def test_metrics_validation():
    with pytest.raises(InputError):
        correlation_metrics([1.0], [1.0])
    with pytest.raises(InputError):
        correlation_metrics([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(DataError):
        correlation_metrics([1.0, np.nan], [1.0, 2.0])


# --- MOS screening -------------------------------------------------------


def rating_block(n_subjects=10, n_images=12, n_anti=0, sigma=0.15, seed=0):
    rng = np.random.default_rng(seed)
    base = np.linspace(1.2, 4.8, n_images)
    rows = []
    for s in range(n_subjects):
        center = base if s >= n_anti else 6.0 - base
        rows.append(np.clip(center + rng.normal(0, sigma, n_images), 1, 5))
    return np.array(rows)


def test_mos_keeps_coherent_panel():
    R = rating_block(n_subjects=9)
    res = mos_from_ratings(R)
    assert res.rejected == ()
    assert res.kept == tuple(range(9))
    assert np.array_equal(res.mos, R.mean(axis=0))
    assert res.agreement_min > 0.9


def test_mos_drops_anticorrelated_subjects():
    R = rating_block(n_subjects=10, n_anti=2)
    res = mos_from_ratings(R)
    assert set(res.rejected) == {0, 1}
    assert len(res.kept) == 8
    assert np.array_equal(res.mos, R[2:].mean(axis=0))


def test_mos_never_drops_below_min_subjects():
    rng = np.random.default_rng(3)
    R = np.clip(rng.uniform(1, 5, (4, 10)), 1, 5)  # mutually incoherent
    res = mos_from_ratings(R, threshold=0.99, min_subjects=3)
    assert len(res.kept) == 3


def test_mos_validation():
    with pytest.raises(InputError):
        mos_from_ratings(np.ones((2, 5)))
    with pytest.raises(DataError):
        mos_from_ratings(np.full((3, 5), 6.0))
    with pytest.raises(ParameterError):
        mos_from_ratings(rating_block(4), min_subjects=1)


@given(st.integers(0, 200))
@settings(max_examples=25, deadline=None)
def test_mos_result_is_mean_of_kept(seed):
    R = rating_block(n_subjects=7, n_anti=1, seed=seed)
    res = mos_from_ratings(R)
    assert isinstance(res, MosResult)
    assert np.allclose(res.mos, R[list(res.kept)].mean(axis=0))
    assert set(res.kept) | set(res.rejected) == set(range(7))


# --- cross validation -----------------------------------------------------


def synthetic_samples(n_scenes=12, per_scene=3, seed=0, dim=4):
    """Feature 0 tracks quality (plus noise dims); MOS tracks quality too."""
    rng = np.random.default_rng(seed)
    samples = []
    for s in range(n_scenes):
        base = rng.uniform(1.5, 3.5)
        for k in range(per_scene):
            quality = base + 0.45 * k
            feats = np.concatenate(
                [[quality + rng.normal(0, 0.05)], rng.normal(size=dim - 1)]
            )
            samples.append(
                RatedSample(
                    id=f"scene{s:02d}_m{k}",
                    scene=f"scene{s:02d}",
                    method=str(k),
                    features=feats,
                    mos_vc=float(np.clip(quality + rng.normal(0, 0.05), 1, 5)),
                )
            )
    return samples


def test_cross_validate_recovers_predictive_feature():
    samples = synthetic_samples()
    rep = cross_validate(samples, iterations=20, seed=0)
    assert isinstance(rep, EvalReport)
    assert rep.iterations == 20 and rep.skipped == 0
    assert rep.plcc_mean > 0.9 and rep.srcc_mean > 0.85
    assert rep.train_fraction == 0.8 and rep.seed == 0


def test_cross_validate_is_seed_deterministic():
    samples = synthetic_samples()
    a = cross_validate(samples, iterations=10, seed=5)
    b = cross_validate(samples, iterations=10, seed=5)
    assert a == b
    c = cross_validate(samples, iterations=10, seed=6)
    assert a != c


def test_cross_validate_feature_column_subset():
    samples = synthetic_samples()
    good = cross_validate(samples, iterations=10, seed=0, feature_columns=[0])
    noise = cross_validate(samples, iterations=10, seed=0, feature_columns=[1, 2, 3])
    assert good.plcc_mean > noise.plcc_mean


def test_cross_validate_groups_keep_scenes_together():
    # two samples per scene with identical features: if scenes never split,
    # train and test rows cannot share a feature vector
    samples = synthetic_samples(n_scenes=8, per_scene=2, seed=1)
    rep = cross_validate(samples, iterations=5, seed=2, group_by_scene=True)
    assert rep.skipped == 0


def test_cross_validate_validation():
    samples = synthetic_samples(n_scenes=2, per_scene=1)
    with pytest.raises(InputError):
        cross_validate(samples[:3], iterations=5)
    with pytest.raises(ParameterError):
        cross_validate(synthetic_samples(), iterations=0)
    with pytest.raises(ParameterError):
        cross_validate(synthetic_samples(), train_fraction=1.5)


def test_rated_sample_validation():
    with pytest.raises(DataError):
        RatedSample(id="x", scene="x", method="m", features=[1.0], mos_vc=9.0)
    with pytest.raises(DataError):
        RatedSample(id="x", scene="x", method="m", features=[np.nan], mos_vc=3.0)
