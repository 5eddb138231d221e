"""Epsilon-SVR regression to MOS, rating aggregation, and evaluation.

The solver is a two-variable SMO on the standard dual with box [0, C] and
the equality constraint sum(alpha - alpha*) = 0; working pairs are the
maximal KKT violators. Training data is z-score normalised and models are
serialisable to a small line-oriented text format.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.stats import rankdata

from . import _kernels
from .errors import (
    ConvergenceError,
    DataError,
    DecodeError,
    DegenerateDataError,
    FormatError,
    InputError,
    ParameterError,
)

MODEL_MAGIC = "VCASIR-MODEL v1"
KERNELS = ("rbf", "linear")
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class SvrParams:
    """Solver hyperparameters. gamma=None resolves to 1/dim at training
    time; max_iter=None resolves to max(10000, 10*n^2), capped at 1e7. The
    seed is carried for interface completeness only: the solver itself is
    deterministic, so randomness lives entirely in data splits."""

    kernel: str = "rbf"
    C: float = 10.0
    epsilon: float = 0.1
    gamma: float | None = None
    tol: float = 1e-3
    max_iter: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ParameterError(f"unknown kernel {self.kernel!r}")
        if self.C <= 0:
            raise ParameterError("C must be positive")
        if self.epsilon < 0:
            raise ParameterError("epsilon must be non-negative")
        if self.gamma is not None and self.gamma <= 0:
            raise ParameterError("gamma must be positive")
        if self.tol <= 0:
            raise ParameterError("tol must be positive")


def _kernel_matrix(kernel, gamma, A, B):
    if kernel == "linear":
        return A @ B.T
    sq_a = np.sum(A * A, axis=1)[:, None]
    sq_b = np.sum(B * B, axis=1)[None, :]
    d2 = np.maximum(sq_a + sq_b - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * d2)


@dataclass
class SvrModel:
    """Trained regressor: normalisation stats plus support vectors (already
    normalised), their coefficients beta = alpha - alpha*, and the bias."""

    kernel: str
    C: float
    epsilon: float
    gamma: float
    tol: float
    norm_mean: np.ndarray
    norm_std: np.ndarray
    bias: float
    support_vectors: np.ndarray
    coefficients: np.ndarray
    dual_objective: float = field(default=math.nan, compare=False)
    iterations: int = field(default=0, compare=False)

    @property
    def dim(self) -> int:
        return self.norm_mean.shape[0]

    @property
    def n_sv(self) -> int:
        return self.coefficients.shape[0]

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise InputError(f"expected {self.dim} features, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise DataError("non-finite feature values")
        Z = (X - self.norm_mean[None, :]) / self.norm_std[None, :]
        if self.n_sv == 0:
            return np.full(X.shape[0], self.bias)
        K = _kernel_matrix(self.kernel, self.gamma, Z, self.support_vectors)
        return K @ self.coefficients + self.bias


def train_svr(X, y, params: SvrParams = SvrParams()) -> SvrModel:
    """Fit an epsilon-SVR on rows of X against targets y.

    Features are z-scored with a floored standard deviation so constant
    columns stay harmless. Raises ConvergenceError if the iteration budget
    runs out with the KKT gap still above tol.
    """
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    n, dim = X.shape
    if n < 2:
        raise InputError("need at least 2 training samples")
    if y.shape[0] != n:
        raise InputError(f"{n} feature rows but {y.shape[0]} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("non-finite training data")
    gamma = params.gamma if params.gamma is not None else 1.0 / dim
    if params.max_iter is not None:
        max_iter = params.max_iter
    else:
        max_iter = min(max(10_000, 10 * n * n), 10_000_000)

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    Z = (X - mean[None, :]) / std[None, :]

    K = _kernel_matrix(params.kernel, gamma, Z, Z)
    beta, bias, alpha_total, iters, viol = _kernels.smo_epsilon_svr(
        np.ascontiguousarray(K), y, params.C, params.epsilon, params.tol, max_iter
    )
    if viol > params.tol:
        raise ConvergenceError(
            f"SMO stopped after {iters} iterations with KKT violation {viol:g}",
            iterations=iters,
            kkt_violation=float(viol),
        )
    objective = float(
        y @ beta - 0.5 * beta @ (K @ beta) - params.epsilon * alpha_total
    )
    # dual feasibility holds by construction; assert it anyway
    if abs(beta.sum()) > params.tol or np.any(np.abs(beta) > params.C + 1e-12):
        raise ConvergenceError(
            "solver left the feasible region",
            iterations=int(iters),
            kkt_violation=float(viol),
        )
    sv = beta != 0.0
    return SvrModel(
        kernel=params.kernel,
        C=params.C,
        epsilon=params.epsilon,
        gamma=gamma,
        tol=params.tol,
        norm_mean=mean,
        norm_std=std,
        bias=float(bias),
        support_vectors=Z[sv],
        coefficients=beta[sv],
        dual_objective=objective,
        iterations=int(iters),
    )


def predict_svr(model: SvrModel, X) -> np.ndarray:
    """Decision function sum_i coeff_i * K(sv_i, normalize(x)) + bias."""
    return model.predict(X)


def _fmt(x: float) -> str:
    return "%.17g" % x


def serialize_model(model: SvrModel, path) -> None:
    """Write the model as LF-terminated text; floats use %.17g so a
    round-trip reproduces bit-identical predictions."""
    lines = [
        MODEL_MAGIC,
        model.kernel,
        " ".join(_fmt(v) for v in (model.C, model.epsilon, model.gamma, model.tol)),
        str(model.dim),
        " ".join(_fmt(v) for v in model.norm_mean),
        " ".join(_fmt(v) for v in model.norm_std),
        _fmt(model.bias),
        str(model.n_sv),
    ]
    for coeff, row in zip(model.coefficients, model.support_vectors):
        lines.append(" ".join([_fmt(coeff)] + [_fmt(v) for v in row]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> SvrModel:
    with open(path, "r") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a {MODEL_MAGIC!r} file")
    try:
        kernel = lines[1].strip()
        if kernel not in KERNELS:
            raise DecodeError(f"{path}: unknown kernel {kernel!r}")
        C, epsilon, gamma, tol = (float(v) for v in lines[2].split())
        dim = int(lines[3])
        mean = np.array([float(v) for v in lines[4].split()], dtype=np.float64)
        std = np.array([float(v) for v in lines[5].split()], dtype=np.float64)
        bias = float(lines[6])
        n_sv = int(lines[7])
        if mean.shape[0] != dim or std.shape[0] != dim:
            raise DecodeError(f"{path}: normalisation length != dim")
        sv_lines = lines[8 : 8 + n_sv]
        if len(sv_lines) != n_sv:
            raise DecodeError(f"{path}: expected {n_sv} support vector lines")
        coeffs = np.empty(n_sv, dtype=np.float64)
        vecs = np.empty((n_sv, dim), dtype=np.float64)
        for i, ln in enumerate(sv_lines):
            vals = [float(v) for v in ln.split()]
            if len(vals) != dim + 1:
                raise DecodeError(f"{path}: support vector line {i} has wrong length")
            coeffs[i] = vals[0]
            vecs[i] = vals[1:]
    except (ValueError, IndexError) as exc:
        raise DecodeError(f"{path}: malformed model file ({exc})") from exc
    return SvrModel(
        kernel=kernel,
        C=C,
        epsilon=epsilon,
        gamma=gamma,
        tol=tol,
        norm_mean=mean,
        norm_std=std,
        bias=bias,
        support_vectors=vecs,
        coefficients=coeffs,
    )


# --- correlation metrics ------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    plcc: float
    srcc: float
    krcc: float
    rmse: float


def _rank_pearson(ra, rb):
    # cov / sqrt(var_a * var_b) in one division: rank sums and products are
    # exact in float64, so perfect orderings come out exactly +/-1
    da = ra - ra.mean()
    db = rb - rb.mean()
    return float((da @ db) / math.sqrt((da @ da) * (db @ db)))


def _kendall_tau_b(p, a):
    s_p = np.sign(p[:, None] - p[None, :])
    s_a = np.sign(a[:, None] - a[None, :])
    iu = np.triu_indices(p.shape[0], 1)
    s_p, s_a = s_p[iu], s_a[iu]
    conc_minus_disc = float(np.sum(s_p * s_a))
    n0 = s_p.shape[0]
    ties_p = int(np.count_nonzero(s_p == 0))
    ties_a = int(np.count_nonzero(s_a == 0))
    return conc_minus_disc / math.sqrt(float((n0 - ties_p) * (n0 - ties_a)))


def correlation_metrics(predicted, actual) -> Metrics:
    """PLCC, SRCC (Pearson on average ranks), KRCC (tau-b), RMSE.

    Raw scores against raw MOS; no fitted mapping in between. Zero variance
    on either side leaves the correlations undefined and raises
    DegenerateDataError carrying the still-valid RMSE. The rank statistics
    are computed with single-division normalisations so that untied perfect
    orderings score exactly +/-1.
    """
    p = np.asarray(predicted, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.shape[0] != a.shape[0]:
        raise InputError("prediction/label length mismatch")
    if p.shape[0] < 2:
        raise InputError("need at least 2 points")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise DataError("non-finite scores")
    rmse = float(np.sqrt(np.mean((p - a) ** 2)))
    if np.ptp(p) == 0.0 or np.ptp(a) == 0.0:
        raise DegenerateDataError("zero variance makes correlations undefined", rmse)
    plcc = float(np.corrcoef(p, a)[0, 1])
    srcc = _rank_pearson(rankdata(p), rankdata(a))
    krcc = _kendall_tau_b(p, a)
    return Metrics(plcc=plcc, srcc=srcc, krcc=krcc, rmse=rmse)


# --- MOS from raw ratings -----------------------------------------------------


@dataclass(frozen=True)
class MosResult:
    mos: np.ndarray
    kept: tuple[int, ...]
    rejected: tuple[int, ...]
    agreement_avg: float
    agreement_min: float
    agreement_max: float


def _subject_plcc(ratings, idx, members):
    others = [m for m in members if m != idx]
    mean_others = ratings[others].mean(axis=0)
    own = ratings[idx]
    if np.ptp(own) == 0.0 or np.ptp(mean_others) == 0.0:
        return -math.inf  # constant raters can never demonstrate agreement
    return float(np.corrcoef(own, mean_others)[0, 1])


def mos_from_ratings(
    ratings, threshold: float = 0.7, min_subjects: int = 3
) -> MosResult:
    """Mean opinion scores with iterative outlier-subject rejection.

    Each round scores every remaining subject by PLCC against the mean of
    the other subjects and drops the lowest scorer while it falls below the
    threshold; never drops below ``min_subjects`` subjects. MOS is the mean
    rating of the retained subjects per image.
    """
    R = np.asarray(ratings, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] < 3 or R.shape[1] < 2:
        raise InputError("ratings must be a (subjects x images) matrix, 3x2 or more")
    if not np.all(np.isfinite(R)):
        raise DataError("non-finite ratings")
    if np.any(R < 1.0) or np.any(R > 5.0):
        raise DataError("ratings must lie in [1, 5]")
    if min_subjects < 2:
        raise ParameterError("min_subjects must be >= 2")
    members = list(range(R.shape[0]))
    rejected = []
    while len(members) > min_subjects:
        scores = {m: _subject_plcc(R, m, members) for m in members}
        worst = min(members, key=lambda m: (scores[m], m))
        if scores[worst] >= threshold:
            break
        members.remove(worst)
        rejected.append(worst)
    finals = [_subject_plcc(R, m, members) for m in members]
    finals = [f for f in finals if math.isfinite(f)]
    if not finals:
        raise DegenerateDataError("no finite subject agreement remains", math.nan)
    return MosResult(
        mos=R[members].mean(axis=0),
        kept=tuple(members),
        rejected=tuple(rejected),
        agreement_avg=float(np.mean(finals)),
        agreement_min=float(min(finals)),
        agreement_max=float(max(finals)),
    )


# --- cross validation ---------------------------------------------------------


@dataclass(frozen=True)
class RatedSample:
    """One corpus entry ready for learning: feature vector plus labels."""

    id: str
    scene: str
    method: str
    features: np.ndarray
    mos_vc: float

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 1 or not np.all(np.isfinite(f)):
            raise DataError(f"{self.id}: features must be a finite 1-D vector")
        object.__setattr__(self, "features", f)
        if not (1.0 <= self.mos_vc <= 5.0):
            raise DataError(f"{self.id}: mos_vc {self.mos_vc} outside [1, 5]")


@dataclass(frozen=True)
class EvalReport:
    plcc_mean: float
    plcc_std: float
    srcc_mean: float
    srcc_std: float
    krcc_mean: float
    krcc_std: float
    rmse_mean: float
    rmse_std: float
    iterations: int
    skipped: int
    train_fraction: float
    seed: int


def _split_groups(groups, train_fraction, rng):
    uniq = sorted(set(groups))
    if len(uniq) < 2:
        raise InputError("need at least 2 groups to split")
    perm = [uniq[i] for i in rng.permutation(len(uniq))]
    n_train = int(math.floor(train_fraction * len(uniq) + 0.5))
    n_train = min(max(n_train, 1), len(uniq) - 1)
    train_groups = set(perm[:n_train])
    mask = np.array([g in train_groups for g in groups])
    return mask


def cross_validate(
    samples,
    params: SvrParams = SvrParams(),
    iterations: int = 100,
    train_fraction: float = 0.8,
    seed: int = 0,
    group_by_scene: bool = True,
    feature_columns=None,
) -> EvalReport:
    """Repeated random-split evaluation.

    Each iteration draws a split of the scene groups (or of individual
    samples when group_by_scene is False), trains on the training share and
    scores the held-out rest. Splits keep every variant of a scene on the
    same side so no content leaks across. Degenerate test sets are skipped;
    more than 10% skips aborts.
    """
    samples = list(samples)
    if len(samples) < 4:
        raise InputError("need at least 4 samples to cross-validate")
    if not 0.0 < train_fraction < 1.0:
        raise ParameterError("train_fraction must lie in (0, 1)")
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    X = np.stack([s.features for s in samples])
    if feature_columns is not None:
        X = X[:, list(feature_columns)]
    y = np.array([s.mos_vc for s in samples])
    groups = [s.scene if group_by_scene else s.id for s in samples]
    rng = np.random.default_rng(seed)
    collected = []
    skipped = 0
    for _ in range(iterations):
        train_mask = _split_groups(groups, train_fraction, rng)
        if train_mask.sum() < 2 or (~train_mask).sum() < 2:
            skipped += 1
            continue
        model = train_svr(X[train_mask], y[train_mask], params)
        try:
            m = correlation_metrics(model.predict(X[~train_mask]), y[~train_mask])
        except DegenerateDataError:
            skipped += 1
            continue
        collected.append(m)
    if skipped > 0.1 * iterations:
        raise InputError(
            f"{skipped}/{iterations} evaluation splits were degenerate"
        )
    arr = np.array([[m.plcc, m.srcc, m.krcc, m.rmse] for m in collected])
    means = arr.mean(axis=0)
    stds = arr.std(axis=0)
    return EvalReport(
        plcc_mean=float(means[0]),
        plcc_std=float(stds[0]),
        srcc_mean=float(means[1]),
        srcc_std=float(stds[1]),
        krcc_mean=float(means[2]),
        krcc_std=float(stds[2]),
        rmse_mean=float(means[3]),
        rmse_std=float(stds[3]),
        iterations=len(collected),
        skipped=skipped,
        train_fraction=train_fraction,
        seed=seed,
    )


def resolve_params(params: SvrParams, dim: int) -> SvrParams:
    """Fill in the data-dependent defaults (gamma) for reporting."""
    if params.gamma is None:
        return replace(params, gamma=1.0 / dim)
    return params
