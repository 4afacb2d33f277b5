"""CSV persistence for trajectories and aggregates.

Per-restart files carry one row per evaluation::

    restart,eval,x0..x{d-1},f,c0..c{m-1},feasible,best_feasible,lambda0..lambda{m-1},rho

Aggregate files carry one row per evaluation count::

    eval,mean_best_feasible,stderr,n_included,n_excluded

Absent values (no feasible point yet, no AL state for random search) are
empty fields. Floats are written with ``repr`` so a round trip is exact.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..auglag import ALState
from ..problems import Evaluation
from ..strategies import Trajectory
from .experiment import AggregateResult

AGGREGATE_HEADER = ["eval", "mean_best_feasible", "stderr", "n_included", "n_excluded"]


class MalformedCSV(ValueError):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _opt(s: str):
    return None if s == "" else float(s)


def trajectory_header(d: int, m: int) -> list[str]:
    return (
        ["restart", "eval"]
        + [f"x{i}" for i in range(d)]
        + ["f"]
        + [f"c{i}" for i in range(m)]
        + ["feasible", "best_feasible"]
        + [f"lambda{i}" for i in range(m)]
        + ["rho"]
    )


def write_trajectory_csv(t: Trajectory, path, restart: int | None = None) -> None:
    if not t.evaluations:
        raise ValueError("cannot write an empty trajectory")
    restart = t.restart if restart is None else restart
    d = t.evaluations[0].x.size
    m = t.evaluations[0].c.size
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(d, m))
        for k, (ev, best, s) in enumerate(zip(t.evaluations, t.best_feasible, t.al_states), 1):
            lam = [""] * m if s is None else [_fmt(v) for v in s.lam]
            rho = "" if s is None else _fmt(s.rho)
            w.writerow(
                [restart or 0, k]
                + [_fmt(v) for v in ev.x]
                + [_fmt(ev.f)]
                + [_fmt(v) for v in ev.c]
                + [int(ev.feasible), _fmt(best)]
                + lam
                + [rho]
            )


def write_aggregate_csv(a: AggregateResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_HEADER)
        for k, (mean, se) in enumerate(zip(a.mean_trajectory, a.stderr_trajectory), 1):
            w.writerow([k, _fmt(mean), _fmt(se), a.n_included, a.n_excluded])


def write_csv(obj, path) -> None:
    """Write a :class:`Trajectory` or an :class:`AggregateResult`."""
    if isinstance(obj, Trajectory):
        write_trajectory_csv(obj, path)
    elif isinstance(obj, AggregateResult):
        write_aggregate_csv(obj, path)
    else:
        raise TypeError(f"cannot write {type(obj).__name__} as CSV")


def _read_trajectory(header, rows, path) -> Trajectory:
    d = sum(1 for h in header if h.startswith("x"))
    m = sum(1 for h in header if h.startswith("c"))
    if header != trajectory_header(d, m):
        raise MalformedCSV(f"{path}: unexpected trajectory header {header}")
    t = Trajectory()
    for row in rows:
        if len(row) != len(header):
            raise MalformedCSV(f"{path}: row has {len(row)} fields, expected {len(header)}")
        t.restart = int(row[0])
        i = 2
        x = np.array([float(v) for v in row[i : i + d]])
        i += d
        f = float(row[i])
        i += 1
        c = np.array([float(v) for v in row[i : i + m]])
        i += m
        feasible = row[i] == "1"
        best = _opt(row[i + 1])
        i += 2
        lam, rho = row[i : i + m], row[i + m]
        state = None if rho == "" else ALState([float(v) for v in lam], float(rho))
        t.evaluations.append(Evaluation(x=x, f=f, c=c, feasible=feasible))
        t.best_feasible.append(best)
        t.al_states.append(state)
    return t


def _read_aggregate(rows, path, label) -> AggregateResult:
    mean, se = [], []
    n_inc = n_exc = 0
    for row in rows:
        if len(row) != len(AGGREGATE_HEADER):
            raise MalformedCSV(f"{path}: aggregate row has {len(row)} fields")
        mean.append(np.nan if row[1] == "" else float(row[1]))
        se.append(np.nan if row[2] == "" else float(row[2]))
        n_inc, n_exc = int(row[3]), int(row[4])
    return AggregateResult.from_arrays(
        np.array(mean), np.array(se), n_included=n_inc, n_excluded=n_exc, label=label
    )


def read_csv(path):
    """Read back whatever :func:`write_csv` produced, detected from the header."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise MalformedCSV(f"{path}: not a text file") from exc
    if not rows:
        raise MalformedCSV(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    try:
        if header == AGGREGATE_HEADER:
            return _read_aggregate(body, path, label=path.parent.name or path.stem)
        if header[:2] == ["restart", "eval"]:
            return _read_trajectory(header, body, path)
    except (ValueError, IndexError) as exc:
        if isinstance(exc, MalformedCSV):
            raise
        raise MalformedCSV(f"{path}: {exc}") from exc
    raise MalformedCSV(f"{path}: unrecognized header {header}")
