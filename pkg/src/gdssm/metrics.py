"""Evaluation harness: shared-task losses, prediction and sensitivity
comparisons, out-of-distribution and dimension sweeps, and alignment of
trained parameters with the exact construction.

Every evaluation draws task i from the stream (seed, block + i), so all
predictors are always scored on identical task sets and results do not
depend on evaluation order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import model as mdl
from . import oracles
from .numerics import RngStream, cosine_similarity
from .tasks import RegressionTask, STREAM_EVAL_BASE, sample_task

__all__ = [
    "Predictor",
    "ResultRow",
    "ComparisonReport",
    "SensitivityReport",
    "AlignmentRow",
    "RESULT_HEADER",
    "make_eval_tasks",
    "eval_loss",
    "compare_predictions",
    "sensitivity_similarity",
    "sweep",
    "param_alignment",
    "write_results_csv",
    "zero_predictor",
    "gd_predictor",
    "nonlinear_gd_predictor",
    "newton_predictor",
    "constructed_1d_predictor",
    "constructed_nd_predictor",
    "constructed_multilayer_predictor",
    "model_predictor",
    "lsa_gd_predictor",
]

RESULT_HEADER = "predictor,metric,f,n_context,alpha,seed,value,sem"


@dataclass
class Predictor:
    """A named query predictor, optionally with batch and Jacobian paths."""

    tag: str
    predict: Callable[[RegressionTask], np.ndarray]
    predict_batch: Callable[[list[RegressionTask]], np.ndarray] | None = None
    jacobian: Callable[[RegressionTask], np.ndarray] | None = None

    def batch(self, tasks: list[RegressionTask]) -> np.ndarray:
        if self.predict_batch is not None:
            return self.predict_batch(tasks)
        return np.stack([np.atleast_1d(self.predict(t)) for t in tasks])

    def jac(self, task: RegressionTask) -> np.ndarray:
        if self.jacobian is not None:
            return self.jacobian(task)
        return mdl.sensitivity(self.predict, task)


@dataclass
class ResultRow:
    predictor: str
    metric: str
    f: int
    n_context: int
    alpha: float
    seed: int
    value: float | None
    sem: float | None


@dataclass
class ComparisonReport:
    mean_l2: float
    max_l2: float
    mean_target_norm: float
    n_tasks: int


@dataclass
class SensitivityReport:
    mean_cosine: float | None
    mean_l2: float
    n_undefined: int
    n_tasks: int


@dataclass
class AlignmentRow:
    name: str
    cosine: float | None
    distance: float


def make_eval_tasks(
    kind: str,
    f_in: int,
    f_out: int,
    n_context: int,
    alpha: float,
    n_tasks: int,
    seed: int,
    base: int = STREAM_EVAL_BASE,
) -> list[RegressionTask]:
    """Task i comes from stream (seed, base + i): shared, order-independent."""
    return [
        sample_task(kind, f_in, f_out, n_context, alpha, RngStream(seed, base + i))
        for i in range(n_tasks)
    ]


def _losses(predictor: Predictor, tasks: list[RegressionTask]) -> np.ndarray:
    preds = predictor.batch(tasks)
    y = np.stack([t.query_y for t in tasks])
    return np.sum((preds - y) ** 2, axis=1)


def eval_loss(predictor: Predictor, tasks: list[RegressionTask]) -> tuple[float, float]:
    """Mean squared query error and its standard error over the task set."""
    vals = _losses(predictor, tasks)
    sem = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return float(np.mean(vals)), sem


def compare_predictions(
    a: Predictor, b: Predictor, tasks: list[RegressionTask]
) -> ComparisonReport:
    pa, pb = a.batch(tasks), b.batch(tasks)
    diffs = np.linalg.norm(pa - pb, axis=1)
    targets = np.linalg.norm(np.stack([t.query_y for t in tasks]), axis=1)
    return ComparisonReport(
        mean_l2=float(np.mean(diffs)),
        max_l2=float(np.max(diffs)),
        mean_target_norm=float(np.mean(targets)),
        n_tasks=len(tasks),
    )


def sensitivity_similarity(
    a: Predictor, b: Predictor, tasks: list[RegressionTask]
) -> SensitivityReport:
    """Cosine and L2 distance between flattened query Jacobians, per task.

    Tasks where either Jacobian is identically zero are excluded from the
    cosine average (undefined direction) and counted.
    """
    cosines: list[float] = []
    l2s: list[float] = []
    undefined = 0
    for task in tasks:
        ja, jb = a.jac(task).ravel(), b.jac(task).ravel()
        l2s.append(float(np.linalg.norm(ja - jb)))
        c = cosine_similarity(ja, jb)
        if c is None:
            undefined += 1
        else:
            cosines.append(c)
    return SensitivityReport(
        mean_cosine=float(np.mean(cosines)) if cosines else None,
        mean_l2=float(np.mean(l2s)),
        n_undefined=undefined,
        n_tasks=len(tasks),
    )


def sweep(
    kind: str,
    factories: dict[str, Callable[[int, float], Predictor]],
    values: list[float],
    *,
    task_kind: str = "linear",
    f: int = 10,
    n_context: int = 10,
    n_tasks: int = 2000,
    seed: int = 0,
) -> list[ResultRow]:
    """Loss rows over an alpha grid (kind="alpha") or feature-dimension grid
    (kind="dimension"). Factories receive (f, alpha) for each grid point;
    all predictors at a grid point share the same tasks.
    """
    if kind not in ("alpha", "dimension"):
        raise ValueError(f"unknown sweep kind {kind!r}")
    rows: list[ResultRow] = []
    for v in values:
        fv = f if kind == "alpha" else int(v)
        av = float(v) if kind == "alpha" else 1.0
        tasks = make_eval_tasks(task_kind, fv, fv, n_context, av, n_tasks, seed)
        for tag in sorted(factories):
            predictor = factories[tag](fv, av)
            mean, sem = eval_loss(predictor, tasks)
            rows.append(ResultRow(predictor.tag, "eval_loss", fv, n_context, av,
                                  seed, mean, sem))
    return rows


def _normalized(arr: np.ndarray) -> np.ndarray | None:
    """Unit Frobenius norm with the dominant entry made positive; None if zero."""
    flat = np.asarray(arr, dtype=np.float64).ravel()
    norm = float(np.linalg.norm(flat))
    if norm == 0.0:
        return None
    flat = flat / norm
    dom = int(np.argmax(np.abs(flat)))
    return -flat if flat[dom] < 0 else flat


def param_alignment(a: mdl.SsmModel, b: mdl.SsmModel) -> list[AlignmentRow]:
    """Scale- and sign-normalized similarity of matching parameter tensors.

    Multiplicative gating lets trained solutions differ from the construction
    by per-tensor scales and paired sign flips, so each tensor is normalized
    to unit Frobenius norm with its dominant entry positive before comparing.
    A zero tensor has no direction: cosine is undefined and the distance is 1
    by convention.
    """
    pa, pb = mdl.param_dict(a), mdl.param_dict(b)
    shared = [k for k in pa if k in pb and pa[k].shape == pb[k].shape]
    rows = []
    for name in shared:
        na, nb = _normalized(pa[name]), _normalized(pb[name])
        if na is None or nb is None:
            rows.append(AlignmentRow(name=name, cosine=None, distance=1.0))
            continue
        rows.append(AlignmentRow(
            name=name,
            cosine=cosine_similarity(na, nb),
            distance=float(np.linalg.norm(na - nb)),
        ))
    return rows


def write_results_csv(rows: list[ResultRow], path: str) -> None:
    """Stable repr formatting so identical results are byte-identical files."""
    def fmt(v) -> str:
        return "undefined" if v is None else repr(float(v))

    with open(path, "w", newline="") as fh:
        fh.write(RESULT_HEADER + "\n")
        for r in rows:
            fh.write(
                f"{r.predictor},{r.metric},{r.f},{r.n_context},{repr(float(r.alpha))},"
                f"{r.seed},{fmt(r.value)},{fmt(r.sem)}\n"
            )


# ---------------------------------------------------------------------------
# Predictor factories


def zero_predictor(f_out: int) -> Predictor:
    return Predictor(
        tag="zero",
        predict=lambda task: np.zeros(f_out),
        predict_batch=lambda tasks: np.zeros((len(tasks), f_out)),
        jacobian=lambda task: np.zeros((f_out, task.f_in)),
    )


def gd_predictor(eta: float, steps: int = 1, l2_lambda: float = 0.0) -> Predictor:
    cfg = oracles.GdConfig(eta=eta, steps=steps, l2_lambda=l2_lambda)
    return Predictor(
        tag=f"gd-oracle({steps})",
        predict=lambda task: oracles.gd_predict(task, cfg),
        predict_batch=lambda tasks: oracles.gd_predict_batch(tasks, cfg),
        # The implicit weights ignore the query, so the Jacobian is W itself.
        jacobian=lambda task: oracles.gd_weights(task, cfg),
    )


def nonlinear_gd_predictor(eta: float, steps: int = 1) -> Predictor:
    cfg = oracles.GdConfig(eta=eta, steps=steps)

    def jacobian(task: RegressionTask) -> np.ndarray:
        # d/dx g(Wx) = diag(g'(Wx)) W with g = sin.
        x_ctx = task.xs[:-1][None]
        y_ctx = task.ys[:-1][None]
        w = np.zeros((task.f_out, task.f_in))
        for _ in range(cfg.steps):
            pre = x_ctx[0] @ w.T
            resid = (np.sin(pre) - y_ctx[0]) * np.cos(pre)
            w = w - cfg.eta * (resid.T @ x_ctx[0]) / task.n_context
        pre_q = w @ task.query_x
        return np.cos(pre_q)[:, None] * w

    return Predictor(
        tag=f"nonlinear-gd-oracle({steps})",
        predict=lambda task: oracles.nonlinear_gd_predict(task, cfg),
        predict_batch=lambda tasks: oracles.nonlinear_gd_predict_batch(tasks, cfg),
        jacobian=jacobian,
    )


def newton_predictor(ridge: float = 1e-8) -> Predictor:
    return Predictor(
        tag="newton",
        predict=lambda task: oracles.newton_predict(task, ridge).prediction,
        predict_batch=lambda tasks: oracles.newton_predict_batch(tasks, ridge),
    )


def constructed_1d_predictor(f: int, eta: float, n_context: int) -> Predictor:
    model = mdl.SsmModel(variant="1d", f=f, n_context=n_context,
                         p1d=mdl.construct_1d(f, eta, n_context))
    return model_predictor(model, tag="constructed-gdssm")


def constructed_nd_predictor(f: int, eta: float, n_context: int) -> Predictor:
    model = mdl.SsmModel(variant="nd", f=f, n_context=n_context,
                         layers=[mdl.construct_nd(f, eta, n_context)])
    return Predictor(
        tag="constructed-gdssm",
        predict=lambda task: mdl.model_predict(model, task),
        predict_batch=lambda tasks: mdl.model_predict_batch(model, tasks),
        jacobian=lambda task: mdl.analytic_sensitivity(model, task),
    )


def constructed_multilayer_predictor(
    f: int, eta: float, n_context: int, n_layers: int
) -> Predictor:
    model = mdl.SsmModel(variant="multilayer", f=f, n_context=n_context,
                         layers=mdl.construct_multilayer(f, eta, n_context, n_layers))
    return model_predictor(model, tag="constructed-gdssm")


def model_predictor(model: mdl.SsmModel, tag: str = "trained-gdssm") -> Predictor:
    return Predictor(
        tag=tag,
        predict=lambda task: mdl.model_predict(model, task),
        predict_batch=lambda tasks: mdl.model_predict_batch(model, tasks),
    )


def lsa_gd_predictor(f_in: int, f_out: int, eta: float, n_context: int) -> Predictor:
    """Paired-layout linear attention with the hand construction (== 1-step GD)."""
    w_k, w_q, w_v = oracles.lsa_gd_construction(f_in, f_out, eta, n_context)
    return Predictor(
        tag="lsa",
        predict=lambda task: oracles.lsa_predict(task, w_k, w_q, w_v, layout="paired"),
    )
