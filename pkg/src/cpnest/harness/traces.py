"""Trace files: ``# key=value`` provenance lines, then CSV records.

Example::

    # cpnest-trace v1
    # solver=Nesterov-ALS-RF-SG
    # problem=class3-inst0
    # status=converged
    # n_x=450
    # ndim=3
    # tol=1e-09
    # version=cpnest 0.1.0
    k,f,grad_norm,delta_x_norm,beta_used,restarted,...
    1,9718.71...,...

Floats are written with ``repr`` so a read-back trace is bit-identical.
"""
from __future__ import annotations

import csv
import io
import os

from .. import __version__
from ..accel import TRACE_COLUMNS, RunTrace, TraceRecord

MAGIC = "# cpnest-trace v1"
_INT_COLUMNS = {"k", "n_f_evals", "n_g_evals", "n_als_sweeps"}


class TraceFormatError(ValueError):
    pass


def _format(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trace_to_text(trace: RunTrace) -> str:
    buf = io.StringIO()
    buf.write(MAGIC + "\n")
    header = {"solver": trace.solver, "problem": trace.problem, "status": trace.status,
              "n_x": trace.n_x, "ndim": trace.ndim, "tol": repr(float(trace.tol))}
    header.update(trace.meta)
    header.setdefault("version", f"cpnest {__version__}")
    for key, value in header.items():
        text = str(value).replace("\n", " ")
        buf.write(f"# {key}={text}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in trace.records:
        writer.writerow([_format(getattr(rec, c)) for c in TRACE_COLUMNS])
    return buf.getvalue()


def write_trace(trace: RunTrace, path) -> None:
    tmp = f"{os.fspath(path)}.part"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(trace_to_text(trace))
    os.replace(tmp, path)


def read_trace(path) -> RunTrace:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MAGIC:
        raise TraceFormatError(f"{path}: not a cpnest trace file")
    meta = {}
    pos = 1
    while pos < len(lines) and lines[pos].startswith("# "):
        key, sep, value = lines[pos][2:].partition("=")
        if not sep:
            raise TraceFormatError(f"{path}: malformed header line {lines[pos]!r}")
        meta[key] = value
        pos += 1
    rows = list(csv.reader(lines[pos:]))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise TraceFormatError(f"{path}: unexpected column header")
    records = []
    for row in rows[1:]:
        values = {}
        for col, text in zip(TRACE_COLUMNS, row):
            if col == "restarted":
                values[col] = text == "1"
            elif col in _INT_COLUMNS:
                values[col] = int(text)
            else:
                values[col] = float(text)
        records.append(TraceRecord(**values))
    try:
        trace = RunTrace(solver=meta.pop("solver"), problem=meta.pop("problem"),
                         status=meta.pop("status"), n_x=int(meta.pop("n_x")),
                         ndim=int(meta.pop("ndim")), tol=float(meta.pop("tol")), records=records)
    except KeyError as exc:
        raise TraceFormatError(f"{path}: missing header key {exc}") from None
    trace.meta = meta
    return trace


def read_trace_dir(directory) -> list:
    """All ``*.trace`` files in ``directory``, sorted by file name."""
    names = sorted(n for n in os.listdir(directory) if n.endswith(".trace"))
    return [read_trace(os.path.join(directory, n)) for n in names]
