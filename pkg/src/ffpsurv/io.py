"""CSV panel ingestion/emission and JSON model files.

CSV schema: header ``subject_id,spell_index,y,d,x1..xp`` (comma-separated,
UTF-8); ``spell_index`` is dense 1..J within each subject, ``y`` must sit on
the psi-grid (within 1e-9 * psi, then snapped exactly), ``d`` is 0/1.  Extra
columns are rejected.  Floats are written with shortest round-trip decimal
form, so write -> read is lossless.

Model files are versioned JSON; unknown top-level fields are preserved
through a read/write cycle within the same format version.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import re

import numpy as np

from .errors import ValidationError
from .estimation import FittedModel
from .model import GRID_RTOL, PanelDataset, Spell

MODEL_FORMAT_VERSION = 1

_BASE_COLUMNS = ("subject_id", "spell_index", "y", "d")
_X_COL = re.compile(r"^x([1-9][0-9]*)$")


def _feature_columns(header):
    """Validate the header and return the feature dimension p."""
    missing = [c for c in _BASE_COLUMNS if c not in header]
    if missing:
        raise ValidationError(f"missing column(s) {missing}", row=1)
    x_nums = []
    for name in header:
        if name in _BASE_COLUMNS:
            continue
        m = _X_COL.match(name)
        if not m:
            raise ValidationError(f"unexpected column {name!r}", row=1)
        x_nums.append(int(m.group(1)))
    if not x_nums:
        raise ValidationError("no feature columns x1..xp found", row=1)
    x_nums.sort()
    if x_nums != list(range(1, len(x_nums) + 1)):
        raise ValidationError(
            f"feature columns must be dense x1..xp, got {['x%d' % k for k in x_nums]}",
            row=1)
    return len(x_nums)


def read_panel_csv(path, psi):
    """Parse and validate a panel CSV into a PanelDataset."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("empty file: header row is mandatory", row=1) from None
        p = _feature_columns(header)
        col = {name: header.index(name) for name in header}
        x_cols = [col[f"x{k}"] for k in range(1, p + 1)]

        rows_by_subject = {}
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(
                    f"expected {len(header)} fields, got {len(row)}", row=row_no)
            sid = row[col["subject_id"]]
            try:
                spell_index = int(row[col["spell_index"]])
            except ValueError:
                raise ValidationError(
                    f"spell_index {row[col['spell_index']]!r} is not an integer",
                    row=row_no) from None
            if spell_index < 1:
                raise ValidationError(
                    f"spell_index must be >= 1, got {spell_index}", row=row_no)
            d_raw = row[col["d"]].strip()
            if d_raw not in ("0", "1"):
                raise ValidationError(f"d must be 0 or 1, got {d_raw!r}", row=row_no)
            try:
                y_raw = float(row[col["y"]])
                x = np.array([float(row[c]) for c in x_cols])
            except ValueError:
                raise ValidationError("non-numeric y or feature value", row=row_no) from None
            k = round(y_raw / psi)
            if k < 0 or abs(y_raw - k * psi) > GRID_RTOL * psi:
                raise ValidationError(
                    f"y={y_raw!r} is not a non-negative multiple of psi={psi!r}",
                    row=row_no)
            rows_by_subject.setdefault(sid, []).append(
                (spell_index, row_no, Spell(y=k * psi, d=int(d_raw), x=x)))

    if not rows_by_subject:
        raise ValidationError("no data rows", row=2)
    subjects = []
    for sid, entries in rows_by_subject.items():
        entries.sort(key=lambda e: e[0])
        indices = [e[0] for e in entries]
        if indices != list(range(1, len(indices) + 1)):
            raise ValidationError(
                f"subject {sid!r} has spell_index sequence {indices}, "
                f"expected dense 1..{len(indices)}", row=entries[0][1])
        subjects.append((sid, tuple(e[2] for e in entries)))
    return PanelDataset(subjects=tuple(subjects), p=p, psi=float(psi))


def _format_float(v):
    return repr(float(v))


def _write_panel(ds, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(list(_BASE_COLUMNS) + [f"x{k}" for k in range(1, ds.p + 1)])
    for sid, j, s in ds.iter_spells():
        writer.writerow([sid, j, _format_float(s.y), s.d]
                        + [_format_float(v) for v in s.x])


def write_panel_csv(ds, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write_panel(ds, fh)


def dataset_hash(ds):
    """SHA-256 of the canonical CSV serialization."""
    buf = _io.StringIO()
    _write_panel(ds, buf)
    return hashlib.sha256(buf.getvalue().encode("utf-8")).hexdigest()


_MODEL_FIELDS = ("format_version", "psi", "beta", "delta", "free_mask", "alpha",
                 "kappa", "normalization", "loglik", "converged", "iterations",
                 "clamp_count", "provenance")


def write_model(model, path, provenance=None, extras=None):
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "psi": model.psi,
        "beta": [float(v) for v in model.beta],
        "delta": [float(v) for v in model.delta],
        "free_mask": [bool(v) for v in model.free_mask],
        "alpha": float(model.alpha),
        "kappa": float(model.kappa),
        "normalization": model.normalization,
        "loglik": float(model.loglik),
        "converged": bool(model.converged),
        "iterations": int(model.iterations),
        "clamp_count": int(model.clamp_count),
        "provenance": dict(provenance or {}),
    }
    for key, value in (extras or {}).items():
        if key not in doc:
            doc[key] = value
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_model(path):
    """Load a model file; returns (FittedModel, provenance, extras).

    ``extras`` holds unknown top-level fields, which :func:`write_model`
    carries through unchanged.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("model file must contain a JSON object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValidationError(
            f"unsupported model format_version {version!r}; "
            f"this build reads version {MODEL_FORMAT_VERSION}")
    missing = [k for k in _MODEL_FIELDS if k not in doc]
    if missing:
        raise ValidationError(f"model file is missing field(s) {missing}")
    alpha = doc["alpha"]
    kappa = doc["kappa"]
    if not (isinstance(alpha, (int, float)) and alpha > 0 and math.isfinite(alpha)):
        raise ValidationError(f"alpha must be a positive finite number, got {alpha!r}")
    if not (isinstance(kappa, (int, float)) and kappa > 0 and math.isfinite(kappa)):
        raise ValidationError(f"kappa must be a positive finite number, got {kappa!r}")
    delta = np.asarray(doc["delta"], dtype=float)
    free_mask = np.asarray(doc["free_mask"], dtype=bool)
    if delta.shape != free_mask.shape:
        raise ValidationError("delta and free_mask lengths differ")
    if np.any(delta < 0) or np.any(delta[~free_mask] != 0.0):
        raise ValidationError("delta must be non-negative and zero where masked")
    try:
        model = FittedModel(
            beta=np.asarray(doc["beta"], dtype=float),
            delta=delta, free_mask=free_mask,
            alpha=float(alpha), kappa=float(kappa), psi=float(doc["psi"]),
            loglik=float(doc["loglik"]), converged=bool(doc["converged"]),
            iterations=int(doc["iterations"]),
            normalization=str(doc["normalization"]),
            clamp_count=int(doc["clamp_count"]))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed model file: {exc}") from None
    extras = {k: v for k, v in doc.items() if k not in _MODEL_FIELDS}
    return model, dict(doc["provenance"]), extras
