"""CSV and JSON result files."""

import csv
import io
import json
import math
from dataclasses import fields
from pathlib import Path

from .runner import ResultRecord

__all__ = ["CSV_COLUMNS", "format_ber", "emit", "records_to_csv", "records_to_json", "load_json"]

CSV_COLUMNS = [
    "distance_km",
    "osnr_db",
    "n_pds",
    "slice_set",
    "equalizer",
    "n_neurons",
    "seed",
    "errors",
    "bits",
    "ber",
    "ci_low",
    "ci_high",
    "below_kp4",
    "train_mse",
    "wall_s",
    "error",
]


def format_ber(x):
    """Scientific notation with 3 significant digits and a bare exponent: 2.25e-4."""
    if x is None:
        return ""
    if x == 0:
        return "0.00e0"
    exp = math.floor(math.log10(abs(x)))
    mant = x / 10**exp
    if round(mant, 2) >= 10:  # 9.996e-5 rounds up to the next decade
        mant, exp = mant / 10, exp + 1
    return f"{mant:.2f}e{exp}"


def _number(x):
    if x is None:
        return ""
    if isinstance(x, float):
        if not math.isfinite(x) or x != int(x) or abs(x) >= 1e16:
            return f"{x:g}"
        return str(int(x))
    return str(x)


def _row(r, timing):
    return {
        "distance_km": _number(r.distance_km),
        "osnr_db": _number(r.osnr_db),
        "n_pds": r.n_pds,
        "slice_set": r.slice_set,
        "equalizer": r.equalizer,
        "n_neurons": _number(r.n_neurons),
        "seed": r.seed,
        "errors": _number(r.errors),
        "bits": _number(r.bits),
        "ber": format_ber(r.ber),
        "ci_low": format_ber(r.ci_low),
        "ci_high": format_ber(r.ci_high),
        "below_kp4": "" if r.below_kp4 is None else str(bool(r.below_kp4)).lower(),
        "train_mse": "" if r.train_mse is None else f"{r.train_mse:.6g}",
        "wall_s": "" if r.wall_s is None or not timing else f"{r.wall_s:.3f}",
        "error": r.error,
    }


def records_to_csv(records, timing=True):
    """CSV text with a fixed header; ``timing=False`` blanks ``wall_s`` for reproducible files."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in records:
        writer.writerow(_row(r, timing))
    return buf.getvalue()


def _finite_or_text(v):
    # strict JSON has no infinities; an unbounded OSNR travels as "inf"
    return f"{v:g}" if isinstance(v, float) and not math.isfinite(v) else v


def records_to_json(records, timing=True):
    rows = []
    for r in records:
        d = {k: _finite_or_text(v) for k, v in r.to_dict().items()}
        if not timing:
            d["wall_s"] = None
        rows.append(d)
    return json.dumps(rows, indent=1, allow_nan=False) + "\n"


def load_json(path):
    """Read records written by :func:`emit` in JSON format."""
    names = {f.name for f in fields(ResultRecord)}
    out = []
    for d in json.loads(Path(path).read_text()):
        row = {k: v for k, v in d.items() if k in names}
        for k in ("distance_km", "osnr_db"):
            if isinstance(row.get(k), str):
                row[k] = float(row[k])
        out.append(ResultRecord(**row))
    return out


def emit(records, fmt="csv", path=None, timing=True):
    """Write ``records`` as CSV or JSON to ``path`` (``None`` returns the text only).

    Raises
    ------
    OSError
        If ``path`` cannot be written.
    """
    if fmt == "csv":
        text = records_to_csv(records, timing)
    elif fmt == "json":
        text = records_to_json(records, timing)
    else:
        raise ValueError(f"unknown format {fmt!r}; expected csv or json")
    if path is not None:
        Path(path).write_text(text)
    return text
