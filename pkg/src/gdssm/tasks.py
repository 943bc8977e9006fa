"""Synthetic regression task sampling and the model's token layouts.

A task is N context pairs plus one held-out query pair. Inputs are uniform
on (-alpha, alpha)^f_in, the true weights are standard normal, and targets
are exactly w_true @ x (linear) or sin(w_true @ x) (sine), noiseless.

Two token layouts feed the models: per-step context vectors [x_t * y_t,
x_{t+1}] for the 1-D variant, and length-3 stride-2 sliding windows
[x_t | y_t | x_{t+1}] over the interleaved x/y stream for the N-D variant.
The query target ys[-1] is never placed in any model input.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream

__all__ = [
    "RegressionTask",
    "sample_task",
    "context_vectors_1d",
    "raw_vectors_1d",
    "interleave_and_window",
    "batch_contexts_1d",
    "batch_windows",
    "batch_raw_1d",
    "dump_tasks_csv",
    "load_tasks_csv",
    "STREAM_PARAM_INIT",
    "STREAM_TRAIN_BASE",
    "STREAM_EVAL_BASE",
    "STREAM_TUNE_BASE",
]

# Stream-id blocks keep sampling purposes collision-free and order-independent:
# a task's draws depend only on (seed, block + index), never on scheduling.
STREAM_PARAM_INIT = 1_000_000_000_000
STREAM_TRAIN_BASE = 2_000_000_000_000
STREAM_EVAL_BASE = 3_000_000_000_000
STREAM_TUNE_BASE = 4_000_000_000_000

TASK_KINDS = ("linear", "sine")


@dataclass
class RegressionTask:
    """N context pairs plus a query; xs[-1] is the query input, ys[-1] its target."""

    kind: str
    xs: np.ndarray      # (n_context + 1, f_in)
    ys: np.ndarray      # (n_context + 1, f_out)
    w_true: np.ndarray  # (f_out, f_in)
    alpha: float

    @property
    def n_context(self) -> int:
        return self.xs.shape[0] - 1

    @property
    def f_in(self) -> int:
        return self.xs.shape[1]

    @property
    def f_out(self) -> int:
        return self.ys.shape[1]

    @property
    def query_x(self) -> np.ndarray:
        return self.xs[-1]

    @property
    def query_y(self) -> np.ndarray:
        return self.ys[-1]


def sample_task(
    kind: str,
    f_in: int,
    f_out: int,
    n_context: int,
    alpha: float,
    rng: RngStream,
) -> RegressionTask:
    """Sample one task. Draw order is fixed: w_true first, then all inputs.

    Inputs are alpha * u with u uniform on (-1, 1), so tasks built from the
    same stream at different alpha share the underlying unit draws and
    differ only by the input scale.
    """
    if kind not in TASK_KINDS:
        raise ValueError(f"unknown task kind {kind!r}, expected one of {TASK_KINDS}")
    if f_in < 1 or f_out < 1 or n_context < 1:
        raise ValueError("f_in, f_out and n_context must all be >= 1")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    w = rng.normal(f_out * f_in).reshape(f_out, f_in)
    xs = alpha * rng.uniform(1.0, (n_context + 1) * f_in).reshape(n_context + 1, f_in)
    # scaling by alpha can round back onto the boundary; keep the interval open
    limit = np.nextafter(alpha, 0.0)
    xs = np.clip(xs, -limit, limit)
    ys = xs @ w.T
    if kind == "sine":
        ys = np.sin(ys)
    return RegressionTask(kind=kind, xs=xs, ys=ys, w_true=w, alpha=alpha)


def context_vectors_1d(task: RegressionTask) -> np.ndarray:
    """Per-step context vectors for the 1-D variant, one row per step.

    Row t (0-based) is [x_t * y_t, x_{t+1}] of length 2*f_in; the last row
    carries the query input. Scalar targets only.
    """
    if task.f_out != 1:
        raise ValueError(
            "context_vectors_1d needs scalar targets; use interleave_and_window "
            "for multi-dimensional outputs"
        )
    n, f = task.n_context, task.f_in
    out = np.empty((n, 2 * f))
    out[:, :f] = task.xs[:n] * task.ys[:n]
    out[:, f:] = task.xs[1:]
    return out


def raw_vectors_1d(task: RegressionTask) -> np.ndarray:
    """Unconstructed token rows [x_t, y_t zero-padded] for the input ablation.

    One extra final row [x_query, 0] delivers the query, since without the
    product construction no earlier row contains it.
    """
    if task.f_out != 1:
        raise ValueError("raw_vectors_1d needs scalar targets")
    n, f = task.n_context, task.f_in
    out = np.zeros((n + 1, 2 * f))
    out[:, :f] = task.xs
    out[:n, f] = task.ys[:n, 0]
    return out


def interleave_and_window(task: RegressionTask) -> np.ndarray:
    """Length-3 stride-2 windows over the interleaved token stream.

    The stream is x_1, y_1, x_2, ..., y_N, x_{N+1}; window t stacks columns
    [x_t | y_t | x_{t+1}], shape (n_context, f, 3). When f_in != f_out both
    are zero-padded to f = max(f_in, f_out).
    """
    n = task.n_context
    f = max(task.f_in, task.f_out)
    xs = np.zeros((n + 1, f))
    xs[:, : task.f_in] = task.xs
    ys = np.zeros((n, f))
    ys[:, : task.f_out] = task.ys[:n]
    out = np.empty((n, f, 3))
    out[:, :, 0] = xs[:n]
    out[:, :, 1] = ys
    out[:, :, 2] = xs[1:]
    return out


def batch_contexts_1d(tasks: list[RegressionTask]) -> np.ndarray:
    return np.stack([context_vectors_1d(t) for t in tasks])


def batch_raw_1d(tasks: list[RegressionTask]) -> np.ndarray:
    return np.stack([raw_vectors_1d(t) for t in tasks])


def batch_windows(tasks: list[RegressionTask]) -> np.ndarray:
    return np.stack([interleave_and_window(t) for t in tasks])


def dump_tasks_csv(tasks: list[RegressionTask], path: str) -> None:
    """Write tasks as rows (task_id, role, index, values...), role in {meta,w,x,y}."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for tid, task in enumerate(tasks):
            writer.writerow([tid, "meta", 0, task.kind, repr(float(task.alpha))])
            for i, row in enumerate(task.w_true):
                writer.writerow([tid, "w", i] + [repr(float(v)) for v in row])
            for i, row in enumerate(task.xs):
                writer.writerow([tid, "x", i] + [repr(float(v)) for v in row])
            for i, row in enumerate(task.ys):
                writer.writerow([tid, "y", i] + [repr(float(v)) for v in row])


def load_tasks_csv(path: str) -> list[RegressionTask]:
    """Inverse of dump_tasks_csv; values round-trip bit-exactly via repr."""
    raw: dict[int, dict[str, list]] = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            tid = int(row[0])
            entry = raw.setdefault(tid, {"meta": None, "w": [], "x": [], "y": []})
            role = row[1]
            if role == "meta":
                entry["meta"] = (row[3], float(row[4]))
            else:
                entry[role].append((int(row[2]), [float(v) for v in row[3:]]))
    tasks = []
    for tid in sorted(raw):
        entry = raw[tid]
        kind, alpha = entry["meta"]
        mats = {}
        for role in ("w", "x", "y"):
            rows = sorted(entry[role])
            mats[role] = np.array([vals for _, vals in rows])
        tasks.append(
            RegressionTask(kind=kind, xs=mats["x"], ys=mats["y"], w_true=mats["w"], alpha=alpha)
        )
    return tasks
