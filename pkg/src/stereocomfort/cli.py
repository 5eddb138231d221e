"""Command-line surface.

Subcommands: disparity, retarget, synth, extract, train, predict, evaluate,
mos. Exit codes: 0 success, 1 input/usage error, 2 internal error. All
randomness sits behind --seed (default 0).
"""

from __future__ import annotations

import argparse
from concurrent.futures import ThreadPoolExecutor
import math
import os
import sys

import numpy as np

from .disparity import BlockMatchParams, estimate_disparity
from .errors import ConvergenceError, InputError, StereoComfortError
from .features import (
    ComfortZone,
    DidParams,
    DrParams,
    FEATURE_GROUPS,
    extract_features,
    group_slices,
)
from .imagecore import (
    StereoPair,
    load_disparity,
    load_gray,
    save_disparity,
    save_gray,
)
from .manifest import (
    read_features,
    read_labels,
    read_manifest,
    read_ratings,
    resolve_path,
    write_features,
    write_labels,
    write_manifest,
    write_scores,
)
from .model import (
    RatedSample,
    SvrParams,
    cross_validate,
    load_model,
    mos_from_ratings,
    serialize_model,
    train_svr,
)
from .retarget import (
    RetargetSpec,
    apply_retarget,
    synth_corpus,
)

_FMT = "%.17g"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _add_feature_flags(p):
    p.add_argument("--alpha", type=float, default=0.4, help="weight of the near-disparity term of dr")
    p.add_argument("--beta", type=float, default=0.6, help="weight of the far-disparity term of dr")
    p.add_argument("--lambda", dest="did_weight", type=float, default=0.5,
                   help="blend between rank mean and rank variance in did")
    p.add_argument("--zone-min", type=float, default=-79.55,
                   help="comfort zone lower bound in pixels")
    p.add_argument("--zone-max", type=float, default=79.55, help="comfort zone upper bound in pixels")


def _add_matcher_flags(p):
    p.add_argument("--window", type=int, default=9, help="odd SAD window side length")
    p.add_argument("--range", type=int, nargs=2, default=(-128, 128),
                   metavar=("MIN", "MAX"), help="disparity search range")
    p.add_argument("--subpixel", action="store_true", help="parabolic sub-pixel refinement")


def _add_disp_io_flags(p):
    p.add_argument("--scale", type=float, default=1.0, help="scale applied to 16-bit PNG disparity values")
    p.add_argument("--offset", type=float, default=0.0, help="offset applied to 16-bit PNG disparity values")


def _add_svr_flags(p):
    p.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    p.add_argument("--C", type=float, default=10.0, help="box constraint")
    p.add_argument("--eps", type=float, default=0.1, help="epsilon tube half-width")
    p.add_argument("--gamma", type=float, default=None, help="rbf width (default 1/dim)")
    p.add_argument("--tol", type=float, default=1e-3, help="KKT stopping tolerance")


def _matcher_params(args, width=None):
    if args.window < 3 or args.window % 2 == 0:
        raise InputError("--window must be an odd number >= 3")
    smin, smax = args.range
    clamped = False
    if width is not None:
        lo, hi = -(width - 1), width - 1
        if smin < lo or smax > hi:
            smin, smax = max(smin, lo), min(smax, hi)
            clamped = True
    return BlockMatchParams((args.window - 1) // 2, smin, smax, args.subpixel), clamped


def _feature_params(args):
    zone = ComfortZone(args.zone_min, args.zone_max)
    return zone, DrParams(args.alpha, args.beta), DidParams(args.did_weight)


def _parse_groups(spec_text, n_fiq):
    names = [g.strip() for g in spec_text.split(",") if g.strip()]
    if not names:
        raise InputError("empty --features selection")
    for g in names:
        if g not in FEATURE_GROUPS:
            raise InputError(f"unknown feature group {g!r} (choose from {', '.join(FEATURE_GROUPS)})")
    if "fiq" in names and n_fiq == 0:
        raise InputError("feature group 'fiq' requested but no fiq_* columns present")
    slices = group_slices(n_fiq)
    cols = []
    for g in FEATURE_GROUPS:  # canonical order regardless of how asked
        if g in names:
            cols.extend(range(slices[g].start, slices[g].stop))
    label = ",".join(g for g in FEATURE_GROUPS if g in names)
    return label, cols


# --- subcommands --------------------------------------------------------------


def _cmd_disparity(args):
    if args.convert:
        dmap = load_disparity(args.convert, args.scale, args.offset)
        save_disparity(dmap, args.out, args.out_scale, args.out_offset)
        print(f"converted {args.convert} -> {args.out}")
        return 0
    if not (args.left and args.right):
        raise InputError("estimation needs --left and --right")
    pair = StereoPair(load_gray(args.left), load_gray(args.right))
    params, clamped = _matcher_params(args, pair.width)
    if clamped:
        _warn(f"search range clamped to [{params.search_min}, {params.search_max}] "
              f"for width {pair.width}")
    dmap = estimate_disparity(pair, params)
    save_disparity(dmap, args.out, args.out_scale, args.out_offset)
    print(f"wrote {args.out} ({dmap.data.shape[1]}x{dmap.data.shape[0]})")
    return 0


def _cmd_retarget(args):
    pair = StereoPair(load_gray(args.left), load_gray(args.right))
    dmap = load_disparity(args.disp, args.scale, args.offset)
    if args.target_width is not None:
        target = args.target_width
    else:
        target = int(math.floor(args.ratio * pair.width + 0.5))
    offsets = None
    if args.offset_left is not None or args.offset_right is not None:
        o_l = args.offset_left if args.offset_left is not None else args.offset_right
        o_r = args.offset_right if args.offset_right is not None else o_l
        offsets = (o_l, o_r)
    spec = RetargetSpec(target, args.op, crop_offsets=offsets,
                        seam_gamma=args.gamma, block_width=args.block_width)
    rpair, rdmap = apply_retarget(pair, dmap, spec)
    parent = os.path.dirname(args.out_prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    save_gray(rpair.left, args.out_prefix + "_left.png")
    save_gray(rpair.right, args.out_prefix + "_right.png")
    save_disparity(rdmap, args.out_prefix + "_disp.pfm")
    print(f"{args.op}: {pair.width} -> {rpair.width} columns, "
          f"wrote {args.out_prefix}_left.png/_right.png/_disp.pfm")
    return 0


def _cmd_synth(args):
    def fallback(pair):
        params, clamped = _matcher_params(args, pair.width)
        if clamped:
            _warn(f"search range clamped to [{params.search_min}, {params.search_max}]")
        _warn("no disparity map on disk; estimating by block matching")
        return estimate_disparity(pair, params)

    rows, failures = synth_corpus(
        args.source_dir,
        args.out_dir,
        ratio=args.ratio,
        seed=args.seed,
        synthetic_mos=args.synthetic_mos,
        noise_sigma=args.noise,
        disp_scale=args.scale,
        disp_offset=args.offset,
        block_width=args.block_width,
        crop_shift_max=args.crop_shift,
        estimate_missing=fallback,
    )
    manifest_path = os.path.join(args.out_dir, "manifest.csv")
    write_manifest(rows, manifest_path)
    print(f"wrote {len(rows)} rows to {manifest_path}")
    for scene, err in failures:
        print(f"error: scene {scene!r}: {err}", file=sys.stderr)
    return 1 if failures else 0


def _extract_matrix(args, rows, manifest_path):
    """Feature matrix for manifest rows, in manifest order. Returns
    (ids, matrix, fiq_names, failures)."""
    zone, drp, didp = _feature_params(args)
    fiq_names = sorted({c for r in rows for c in r.fiq})

    def one(row):
        try:
            pair = StereoPair(
                load_gray(resolve_path(manifest_path, row.left_path)),
                load_gray(resolve_path(manifest_path, row.right_path)),
            )
            if row.disparity_path:
                dmap = load_disparity(
                    resolve_path(manifest_path, row.disparity_path),
                    args.scale, args.offset,
                )
            else:
                params, clamped = _matcher_params(args, pair.width)
                note = " (range clamped)" if clamped else ""
                _warn(f"row {row.id!r}: no disparity map, estimating{note}")
                dmap = estimate_disparity(pair, params)
            fv = extract_features(pair, dmap, zone, drp, didp,
                                  fiq=[row.fiq[c] for c in fiq_names])
            return row.id, fv.as_array(), None
        except Exception as exc:  # noqa: BLE001 - isolate row failures
            return row.id, None, f"{type(exc).__name__}: {exc}"

    workers = min(8, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, rows))
    ids = [rid for rid, vec, err in results if err is None]
    vecs = [vec for _, vec, err in results if err is None]
    failures = [(rid, err) for rid, _, err in results if err is not None]
    matrix = np.stack(vecs) if vecs else np.empty((0, 18 + len(fiq_names)))
    return ids, matrix, fiq_names, failures


def _cmd_extract(args):
    rows = read_manifest(args.manifest)
    ids, matrix, fiq_names, failures = _extract_matrix(args, rows, args.manifest)
    if ids:
        write_features(args.out, ids, matrix, fiq_names)
        print(f"wrote {len(ids)} feature rows to {args.out}")
    for rid, err in failures:
        print(f"error: row {rid!r}: {err}", file=sys.stderr)
    return 1 if failures else 0


def _svr_params(args):
    return SvrParams(kernel=args.kernel, C=args.C, epsilon=args.eps,
                     gamma=args.gamma, tol=args.tol)


def _cmd_train(args):
    ids, X, fiq_names = read_features(args.data)
    labels = read_labels(args.labels)
    keep = [i for i, rid in enumerate(ids) if rid in labels]
    missing = len(ids) - len(keep)
    if missing:
        _warn(f"{missing} feature rows have no label and were dropped")
    if len(keep) < 2:
        raise InputError("fewer than 2 labelled samples")
    y = np.array([labels[ids[i]]["mos_vc"] for i in keep])
    X = X[keep]
    label, cols = _parse_groups(args.features, len(fiq_names))
    model = train_svr(X[:, cols], y, _svr_params(args))
    serialize_model(model, args.out)
    print(f"trained on {len(keep)} samples, features [{label}] "
          f"({len(cols)} columns), {model.n_sv} support vectors, "
          f"{model.iterations} iterations; wrote {args.out}")
    return 0


def _cmd_predict(args):
    model = load_model(args.model)
    ids, X, fiq_names = read_features(args.data)
    label, cols = _parse_groups(args.features, len(fiq_names))
    if len(cols) != model.dim:
        raise InputError(
            f"model expects {model.dim} columns but [{label}] selects {len(cols)}"
        )
    write_scores(args.out, ids, model.predict(X[:, cols]))
    print(f"wrote {len(ids)} scores to {args.out}")
    return 0


def _cmd_evaluate(args):
    rows = read_manifest(args.manifest)
    unlabelled = [r.id for r in rows if r.mos_vc is None]
    if unlabelled:
        raise InputError(f"{len(unlabelled)} manifest rows lack mos_vc "
                         f"(first: {unlabelled[0]!r})")
    if args.data:
        ids, matrix, fiq_names = read_features(args.data)
        index = {rid: i for i, rid in enumerate(ids)}
        missing = [r.id for r in rows if r.id not in index]
        if missing:
            raise InputError(f"feature file lacks {len(missing)} manifest ids "
                             f"(first: {missing[0]!r})")
        order = [index[r.id] for r in rows]
        ids, matrix = [r.id for r in rows], matrix[order]
    else:
        ids, matrix, fiq_names, failures = _extract_matrix(args, rows, args.manifest)
        for rid, err in failures:
            print(f"error: row {rid!r}: {err}", file=sys.stderr)
        if failures:
            return 1
    mos = {r.id: r.mos_vc for r in rows}
    scene = {r.id: r.scene for r in rows}
    samples = [
        RatedSample(id=rid, scene=scene[rid], method="", features=vec,
                    mos_vc=mos[rid])
        for rid, vec in zip(ids, matrix)
    ]
    combos = args.features or [",".join(
        g for g in FEATURE_GROUPS if g != "fiq" or fiq_names
    )]
    params = _svr_params(args)
    reports = []
    for combo in combos:
        label, cols = _parse_groups(combo, len(fiq_names))
        rep = cross_validate(
            samples, params, iterations=args.iters, train_fraction=args.split,
            seed=args.seed, group_by_scene=not args.no_group,
            feature_columns=cols,
        )
        reports.append((label, rep))

    width = max(len("features"), *(len(lbl) for lbl, _ in reports))
    print(f"{'features':<{width}}  {'PLCC':>8}  {'SRCC':>8}  {'KRCC':>8}  {'RMSE':>8}")
    for label, rep in reports:
        print(f"{label:<{width}}  {rep.plcc_mean:>8.4f}  {rep.srcc_mean:>8.4f}  "
              f"{rep.krcc_mean:>8.4f}  {rep.rmse_mean:>8.4f}")
    print(f"({args.iters} iterations, split {args.split}, seed {args.seed}, "
          f"grouping {'off' if args.no_group else 'by scene'})")
    if args.out:
        import csv

        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["features", "plcc_mean", "plcc_std", "srcc_mean",
                        "srcc_std", "krcc_mean", "krcc_std", "rmse_mean",
                        "rmse_std", "iterations", "skipped"])
            for label, rep in reports:
                w.writerow([label] + [_FMT % v for v in (
                    rep.plcc_mean, rep.plcc_std, rep.srcc_mean, rep.srcc_std,
                    rep.krcc_mean, rep.krcc_std, rep.rmse_mean, rep.rmse_std,
                )] + [rep.iterations, rep.skipped])
        print(f"wrote {args.out}")
    return 0


def _cmd_mos(args):
    image_ids, subject_ids, mats = read_ratings(args.ratings)
    result = mos_from_ratings(mats["vc"], threshold=args.threshold,
                              min_subjects=args.min_subjects)
    kept = list(result.kept)
    labels = {}
    for i, rid in enumerate(image_ids):
        entry = {"mos_vc": float(result.mos[i])}
        for aspect, col in (("iq", "mos_iq"), ("dq", "mos_dq"), ("ov", "mos_ov")):
            if aspect in mats:
                entry[col] = float(mats[aspect][kept, i].mean())
        labels[rid] = entry
    write_labels(args.out, labels)
    lines = [
        f"subjects: {len(subject_ids)} rated, {len(kept)} retained",
        "rejected: " + (", ".join(subject_ids[i] for i in result.rejected) or "none"),
        f"agreement PLCC avg/min/max: {result.agreement_avg:.4f} / "
        f"{result.agreement_min:.4f} / {result.agreement_max:.4f}",
    ]
    report = "\n".join(lines)
    print(report)
    print(f"wrote {args.out}")
    if args.report:
        with open(args.report, "w", newline="\n") as fh:
            fh.write(report + "\n")
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stereocomfort",
                     description="Visual comfort assessment of stereoscopic "
                                 "retargeted image pairs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("disparity", parents=[], help="estimate or convert disparity maps")
    p.add_argument("--left")
    p.add_argument("--right")
    p.add_argument("--convert", metavar="PATH", help="convert an existing map instead of estimating")
    p.add_argument("--out", required=True)
    p.add_argument("--out-scale", type=float, default=1.0 / 256.0,
                   help="scale used when writing 16-bit PNG")
    p.add_argument("--out-offset", type=float, default=-128.0,
                   help="offset used when writing 16-bit PNG")
    _add_matcher_flags(p)
    _add_disp_io_flags(p)
    p.set_defaults(func=_cmd_disparity)

    p = sub.add_parser("retarget", help="apply one retargeting operator to one pair")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--disp", required=True)
    p.add_argument("--op", required=True, choices=("crop", "scale", "seam", "multi"))
    p.add_argument("--target-width", type=int)
    p.add_argument("--ratio", type=float, default=0.7)
    p.add_argument("--offset-left", type=int)
    p.add_argument("--offset-right", type=int)
    p.add_argument("--gamma", type=float, default=1.0,
                   help="disparity-gradient weight in the seam energy")
    p.add_argument("--block-width", type=int, default=36)
    p.add_argument("--out-prefix", required=True)
    _add_disp_io_flags(p)
    p.set_defaults(func=_cmd_retarget)

    p = sub.add_parser("synth", help="build a retargeted corpus from source pairs")
    p.add_argument("--source-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratio", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--synthetic-mos", action="store_true",
                   help="attach synthetic comfort labels (flagged non-human)")
    p.add_argument("--noise", type=float, default=0.05,
                   help="sigma of the label noise")
    p.add_argument("--crop-shift", type=int, default=4,
                   help="largest offset difference between the crop views")
    p.add_argument("--block-width", type=int, default=36)
    _add_matcher_flags(p)
    _add_disp_io_flags(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("extract", help="manifest -> feature CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_feature_flags(p)
    _add_matcher_flags(p)
    _add_disp_io_flags(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("train", help="features + labels -> model file")
    p.add_argument("--data", required=True, help="feature CSV from extract")
    p.add_argument("--labels", required=True,
                   help="labels CSV (aggregated or raw ratings)")
    p.add_argument("--features", default="dr,bd,did,niq",
                   help="comma-separated feature groups to train on")
    p.add_argument("--out", required=True)
    _add_svr_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="model + features -> scores CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--features", default="dr,bd,did,niq",
                   help="must match the groups the model was trained on")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="cross-validated report per feature subset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--data", help="reuse a feature CSV instead of extracting")
    p.add_argument("--features", action="append",
                   help="feature groups for one report row (repeatable)")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-group", action="store_true",
                   help="split individual rows instead of scene groups")
    p.add_argument("--out", help="also write the report as CSV")
    _add_feature_flags(p)
    _add_matcher_flags(p)
    _add_disp_io_flags(p)
    _add_svr_flags(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("mos", help="raw ratings -> screened MOS labels")
    p.add_argument("--ratings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.7)
    p.add_argument("--min-subjects", type=int, default=3)
    p.add_argument("--report", help="write the screening report to a file")
    p.set_defaults(func=_cmd_mos)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StereoComfortError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort internal error
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
