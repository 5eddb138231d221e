"""CSV plumbing: corpus manifests, feature tables, label tables.

All floats are written with 17 significant digits so write/read round-trips
are bit-exact; all files use LF line endings. Paths inside a manifest are
resolved relative to the manifest's own directory.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, InputError
from .features import feature_names

METHODS = ("source", "crop", "scale", "seam", "multi", "external")
MOS_COLUMNS = ("mos_vc", "mos_iq", "mos_dq", "mos_ov")
RATING_ASPECTS = ("vc", "iq", "dq", "ov")


def _fmt(x: float) -> str:
    return "%.17g" % x


def scene_of(sample_id: str) -> str:
    """Scene identifier: the id minus one trailing '_<method>' suffix."""
    for m in METHODS:
        suffix = "_" + m
        if sample_id.endswith(suffix):
            return sample_id[: -len(suffix)]
    return sample_id


@dataclass
class ManifestRow:
    id: str
    method: str
    left_path: str
    right_path: str
    disparity_path: str | None = None
    mos_vc: float | None = None
    mos_iq: float | None = None
    mos_dq: float | None = None
    mos_ov: float | None = None
    fiq: dict = field(default_factory=dict)
    synthetic: bool = False

    @property
    def scene(self) -> str:
        return scene_of(self.id)


def _parse_optional_float(text, what):
    if text is None or text == "":
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise DataError(f"bad {what}: {text!r}") from exc


def read_manifest(path) -> list[ManifestRow]:
    path = Path(path)
    with open(path, "r", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty manifest")
        cols = list(reader.fieldnames)
        required = ("id", "method", "left_path", "right_path")
        missing = [c for c in required if c not in cols]
        if missing:
            raise FormatError(f"{path}: missing columns {missing}")
        fiq_cols = [c for c in cols if c.startswith("fiq_")]
        rows = []
        seen = set()
        for rec in reader:
            rid = rec["id"]
            if rid in seen:
                raise DataError(f"{path}: duplicate id {rid!r}")
            seen.add(rid)
            method = rec["method"]
            if method not in METHODS:
                raise DataError(f"{path}: row {rid!r} has unknown method {method!r}")
            mos = {
                c: _parse_optional_float(rec.get(c), f"{c} for {rid!r}")
                for c in MOS_COLUMNS
            }
            fiq = {}
            for c in fiq_cols:
                v = _parse_optional_float(rec.get(c), f"{c} for {rid!r}")
                if v is None:
                    raise DataError(f"{path}: row {rid!r} missing {c}")
                fiq[c] = v
            rows.append(
                ManifestRow(
                    id=rid,
                    method=method,
                    left_path=rec["left_path"],
                    right_path=rec["right_path"],
                    disparity_path=rec.get("disparity_path") or None,
                    mos_vc=mos["mos_vc"],
                    mos_iq=mos["mos_iq"],
                    mos_dq=mos["mos_dq"],
                    mos_ov=mos["mos_ov"],
                    fiq=fiq,
                    synthetic=(rec.get("synthetic_flag") or "0").strip() == "1",
                )
            )
    if not rows:
        raise DataError(f"{path}: manifest has no rows")
    return rows


def write_manifest(rows, path) -> None:
    rows = list(rows)
    has_mos = {c: any(getattr(r, c) is not None for r in rows) for c in MOS_COLUMNS}
    fiq_cols = sorted({c for r in rows for c in r.fiq})
    has_flag = any(r.synthetic for r in rows)
    header = ["id", "method", "left_path", "right_path", "disparity_path"]
    header += [c for c in MOS_COLUMNS if has_mos[c]]
    header += fiq_cols
    if has_flag:
        header.append("synthetic_flag")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            rec = [r.id, r.method, r.left_path, r.right_path, r.disparity_path or ""]
            for c in MOS_COLUMNS:
                if has_mos[c]:
                    v = getattr(r, c)
                    rec.append("" if v is None else _fmt(v))
            for c in fiq_cols:
                if c not in r.fiq:
                    raise DataError(f"row {r.id!r} missing {c}")
                rec.append(_fmt(r.fiq[c]))
            if has_flag:
                rec.append("1" if r.synthetic else "0")
            w.writerow(rec)


def resolve_path(manifest_path, p) -> Path:
    """Resolve a manifest-relative path against the manifest's directory."""
    p = Path(p)
    return p if p.is_absolute() else Path(manifest_path).parent / p


# --- feature tables -----------------------------------------------------------


def write_features(path, ids, matrix, fiq_names=()) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    names = feature_names(len(fiq_names), fiq_names)
    if matrix.ndim != 2 or matrix.shape[1] != len(names):
        raise InputError(
            f"feature matrix must be (n, {len(names)}), got {matrix.shape}"
        )
    if len(ids) != matrix.shape[0]:
        raise InputError("id count does not match feature rows")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + names)
        for rid, row in zip(ids, matrix):
            w.writerow([rid] + [_fmt(v) for v in row])


def read_features(path) -> tuple[list[str], np.ndarray, list[str]]:
    """Read a feature CSV; returns (ids, matrix, fiq column names)."""
    path = Path(path)
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty feature file") from None
        fiq_cols = [c for c in header if c.startswith("fiq_")]
        expected = ["id"] + feature_names(len(fiq_cols), fiq_cols)
        if header != expected:
            raise FormatError(f"{path}: unexpected feature header {header}")
        ids, rows = [], []
        for rec in reader:
            if len(rec) != len(header):
                raise DataError(f"{path}: row {rec[:1]} has {len(rec)} fields")
            ids.append(rec[0])
            try:
                rows.append([float(v) for v in rec[1:]])
            except ValueError as exc:
                raise DataError(f"{path}: bad value in row {rec[0]!r}") from exc
    if not rows:
        raise DataError(f"{path}: no feature rows")
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate ids")
    return ids, np.array(rows, dtype=np.float64), fiq_cols


# --- label tables -------------------------------------------------------------


def read_labels(path) -> dict[str, dict[str, float]]:
    """Read labels as {id: {mos_vc: .., ...}}.

    Accepts either pre-aggregated rows (id,mos_vc[,mos_iq,mos_dq,mos_ov])
    or raw per-subject ratings (id,subject_id,vc,iq,dq,ov), which are
    screened and averaged via mos_from_ratings on the comfort aspect.
    """
    path = Path(path)
    with open(path, "r", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty labels file")
        cols = list(reader.fieldnames)
        records = list(reader)
    if not records:
        raise DataError(f"{path}: no label rows")
    if "subject_id" in cols:
        return _aggregate_raw_labels(path, cols, records)
    if "id" not in cols or "mos_vc" not in cols:
        raise FormatError(f"{path}: need id,mos_vc columns (or raw ratings)")
    out = {}
    for rec in records:
        rid = rec["id"]
        if rid in out:
            raise DataError(f"{path}: duplicate id {rid!r}")
        entry = {}
        for c in MOS_COLUMNS:
            if c in cols:
                v = _parse_optional_float(rec.get(c), f"{c} for {rid!r}")
                if v is not None:
                    entry[c] = v
        if "mos_vc" not in entry:
            raise DataError(f"{path}: row {rid!r} lacks mos_vc")
        out[rid] = entry
    return out


def read_ratings(path):
    """Read raw ratings into per-aspect (subjects x images) matrices.

    Returns (image_ids, subject_ids, {aspect: matrix}); every subject must
    rate every image exactly once.
    """
    path = Path(path)
    with open(path, "r", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty ratings file")
        cols = list(reader.fieldnames)
        if "id" not in cols or "subject_id" not in cols or "vc" not in cols:
            raise FormatError(f"{path}: need id,subject_id,vc[,iq,dq,ov] columns")
        aspects = [a for a in RATING_ASPECTS if a in cols]
        records = list(reader)
    if not records:
        raise DataError(f"{path}: no rating rows")
    image_ids, subject_ids = [], []
    for rec in records:
        if rec["id"] not in image_ids:
            image_ids.append(rec["id"])
        if rec["subject_id"] not in subject_ids:
            subject_ids.append(rec["subject_id"])
    img_index = {v: i for i, v in enumerate(image_ids)}
    sub_index = {v: i for i, v in enumerate(subject_ids)}
    mats = {
        a: np.full((len(subject_ids), len(image_ids)), np.nan) for a in aspects
    }
    for rec in records:
        si, ii = sub_index[rec["subject_id"]], img_index[rec["id"]]
        for a in aspects:
            v = _parse_optional_float(rec.get(a), f"{a} rating")
            if v is None:
                raise DataError(
                    f"{path}: missing {a} rating for subject "
                    f"{rec['subject_id']!r} on {rec['id']!r}"
                )
            if not np.isnan(mats[a][si, ii]):
                raise DataError(
                    f"{path}: duplicate rating for subject "
                    f"{rec['subject_id']!r} on {rec['id']!r}"
                )
            mats[a][si, ii] = v
    for a in aspects:
        if np.any(np.isnan(mats[a])):
            raise DataError(f"{path}: incomplete {a} ratings (not every pair rated)")
    return image_ids, subject_ids, mats


def _aggregate_raw_labels(path, cols, records):
    from .model import mos_from_ratings  # deferred: model imports nothing from here

    image_ids, _, mats = read_ratings(path)
    result = mos_from_ratings(mats["vc"])
    kept = list(result.kept)
    out = {}
    for i, rid in enumerate(image_ids):
        entry = {"mos_vc": float(result.mos[i])}
        for aspect, col in (("iq", "mos_iq"), ("dq", "mos_dq"), ("ov", "mos_ov")):
            if aspect in mats:
                entry[col] = float(mats[aspect][kept, i].mean())
        out[rid] = entry
    return out


def write_labels(path, labels: dict) -> None:
    """Write aggregated labels; columns beyond mos_vc appear only when every
    row carries them."""
    ids = list(labels)
    extra = [
        c for c in MOS_COLUMNS[1:] if all(c in labels[i] for i in ids)
    ]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "mos_vc"] + extra)
        for rid in ids:
            w.writerow(
                [rid, _fmt(labels[rid]["mos_vc"])]
                + [_fmt(labels[rid][c]) for c in extra]
            )


def write_scores(path, ids, scores) -> None:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if len(ids) != scores.shape[0]:
        raise InputError("id count does not match score count")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "score"])
        for rid, s in zip(ids, scores):
            w.writerow([rid, _fmt(s)])


def read_scores(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "score"]:
            raise FormatError(f"{path}: expected 'id,score' header")
        ids, vals = [], []
        for rec in reader:
            if len(rec) != 2:
                raise DataError(f"{path}: malformed row {rec}")
            ids.append(rec[0])
            vals.append(float(rec[1]))
    return ids, np.array(vals, dtype=np.float64)
