"""Text and binary file formats for every command output.

Floats are written with 17 significant digits so text files round-trip
bit-exactly. Text outputs open with a ``# format_version=N`` comment line.
"""

import csv
import io as _io
import json
import struct

import numpy as np

from .correlation import CorrelationMatrix
from .exceptions import ConfigError

FORMAT_VERSION = 1
_FLOAT = "%.17g"


def _fmt(v):
    return _FLOAT % v


def _header(**fields):
    parts = [f"format_version={FORMAT_VERSION}"] + [f"{k}={v}" for k, v in fields.items()]
    return "# " + " ".join(parts) + "\n"


def _parse_header(line):
    if not line.startswith("#"):
        return {}
    out = {}
    for tok in line[1:].split():
        if "=" in tok:
            k, v = tok.split("=", 1)
            out[k] = v
    return out


def _write_text(path, text):
    # newline="" keeps output byte-identical across platforms
    with open(path, "w", newline="") as fh:
        fh.write(text)


# -- correlation matrices -----------------------------------------------------


def matrix_to_csv_text(R):
    M = R.entries if isinstance(R, CorrelationMatrix) else np.asarray(R, dtype=complex)
    prov = R.provenance if isinstance(R, CorrelationMatrix) else "imported"
    buf = _io.StringIO()
    buf.write(_header(provenance=prov))
    buf.write(f"dim,{M.shape[0]}\n")
    for z in M.ravel():
        buf.write(f"{_fmt(z.real)},{_fmt(z.imag)}\n")
    return buf.getvalue()


def write_matrix_csv(path, R):
    """``dim,N`` line, then ``re,im`` per entry in row-major order."""
    _write_text(path, matrix_to_csv_text(R))


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    meta = {}
    if lines and lines[0].startswith("#"):
        meta = _parse_header(lines.pop(0))
    if not lines or not lines[0].startswith("dim,"):
        raise ConfigError(f"{path}: missing 'dim,N' header")
    try:
        n = int(lines[0].split(",")[1])
        vals = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed matrix CSV ({exc})") from exc
    if vals.shape != (n * n, 2):
        raise ConfigError(f"{path}: expected {n * n} re,im rows, found {len(vals)}")
    M = (vals[:, 0] + 1j * vals[:, 1]).reshape(n, n)
    prov = meta.get("provenance", "imported")
    return CorrelationMatrix(M, provenance=prov if prov else "imported")


def write_matrix_binary(path, R):
    """Little-endian uint64 dimension, then interleaved float64 re/im, row-major."""
    M = R.entries if isinstance(R, CorrelationMatrix) else np.asarray(R, dtype=complex)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", M.shape[0]))
        fh.write(np.ascontiguousarray(M, dtype="<c16").tobytes())


def read_matrix_binary(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise ConfigError(f"{path}: truncated binary matrix")
    (n,) = struct.unpack("<Q", raw[:8])
    body = raw[8:]
    if len(body) != 16 * n * n:
        raise ConfigError(f"{path}: expected {16 * n * n} payload bytes, found {len(body)}")
    M = np.frombuffer(body, dtype="<c16").reshape(n, n).astype(complex)
    return CorrelationMatrix(M, provenance="imported")


def read_matrix(path):
    """Read either format, chosen by extension (``.bin`` is binary)."""
    path = str(path)
    return read_matrix_binary(path) if path.endswith(".bin") else read_matrix_csv(path)


# -- realizations, spectra, reports -------------------------------------------


def write_realization_csv(path, realization):
    buf = _io.StringIO()
    buf.write(_header(seed=realization.seed, source=realization.source))
    buf.write("re,im\n")
    for z in realization.h:
        buf.write(f"{_fmt(z.real)},{_fmt(z.imag)}\n")
    _write_text(path, buf.getvalue())


def read_realization_csv(path):
    """Return ``(h, meta)`` with the header fields in ``meta``."""
    with open(path, newline="") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    meta = _parse_header(lines[0]) if lines and lines[0].startswith("#") else {}
    rows = [ln for ln in lines if not ln.startswith("#") and ln != "re,im"]
    vals = np.array([[float(v) for v in ln.split(",")] for ln in rows]).reshape(-1, 2)
    return vals[:, 0] + 1j * vals[:, 1], meta


def write_spectrum_csv(path, grid):
    """First row holds the k_z axis, first column the k_y axis."""
    buf = _io.StringIO()
    buf.write(_header())
    buf.write("ky\\kz," + ",".join(_fmt(v) for v in grid.kz) + "\n")
    for ky, row in zip(grid.ky, grid.values):
        buf.write(_fmt(ky) + "," + ",".join(_fmt(v) for v in row) + "\n")
    _write_text(path, buf.getvalue())


def read_spectrum_csv(path):
    from .wavenumber import SpectrumGrid

    with open(path, newline="") as fh:
        rows = [ln.strip().split(",") for ln in fh if ln.strip() and not ln.startswith("#")]
    kz = np.array([float(v) for v in rows[0][1:]])
    ky = np.array([float(r[0]) for r in rows[1:]])
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return SpectrumGrid(values, ky, kz)


def dumps_json(obj):
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, obj):
    if isinstance(obj, dict) and "format_version" not in obj:
        obj = dict(obj, format_version=FORMAT_VERSION)
    _write_text(path, dumps_json(obj))


def write_eigen_csv(path, eigenvalues, fractions):
    buf = _io.StringIO()
    buf.write(_header())
    buf.write("index,eigenvalue,cumulative_fraction\n")
    for i, (lam, f) in enumerate(zip(eigenvalues, fractions)):
        buf.write(f"{i},{_fmt(lam)},{_fmt(f)}\n")
    _write_text(path, buf.getvalue())


def write_trace_csv(path, trace, param_names=None):
    """One row per accepted iterate: iteration, loss, grad_norm, step, then ``x``."""
    n = len(trace.iterates[0][0]) if trace.iterates else 0
    names = list(param_names) if param_names is not None else [f"x{i}" for i in range(n)]
    buf = _io.StringIO()
    buf.write(_header(converged=str(trace.converged).lower()))
    buf.write(",".join(["iteration", "loss", "grad_norm", "step"] + names) + "\n")
    for i, (x, loss, gnorm, step) in enumerate(trace.iterates):
        buf.write(",".join([str(i), _fmt(loss), _fmt(gnorm), _fmt(step)] + [_fmt(v) for v in x]) + "\n")
    _write_text(path, buf.getvalue())


# -- estimator sweeps ---------------------------------------------------------

SWEEP_COLUMNS = ("method", "snr_db", "trial", "nmse", "seed")


def write_sweep_csv(path, records):
    """``records`` are dicts with the ``SWEEP_COLUMNS`` keys."""
    buf = _io.StringIO()
    buf.write(_header())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in records:
        w.writerow([r["method"], _fmt(r["snr_db"]), r["trial"], _fmt(r["nmse"]), r["seed"]])
    _write_text(path, buf.getvalue())


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        out.append(
            {
                "method": row["method"],
                "snr_db": float(row["snr_db"]),
                "trial": int(row["trial"]),
                "nmse": float(row["nmse"]),
                "seed": int(row["seed"]),
            }
        )
    return out


def sweep_summary(records):
    """``{method: {snr_db: {mean, std, n}}}`` with string SNR keys."""
    groups = {}
    for r in records:
        groups.setdefault(r["method"], {}).setdefault(_fmt(r["snr_db"]), []).append(r["nmse"])
    summary = {}
    for method, by_snr in groups.items():
        summary[method] = {
            snr: {"mean": float(np.mean(v)), "std": float(np.std(v)), "n": len(v)}
            for snr, v in by_snr.items()
        }
    return {"format_version": FORMAT_VERSION, "methods": summary}
