"""Reference predictors the state-space constructions are checked against.

All oracles operate on the raw context pairs, never on token layouts, so
they are independent witnesses for the model forward passes: multi-step
(optionally L2-regularized) gradient descent on the implicit linear model,
its nonlinear (sine-link) variant, a one-shot Newton solve of the normal
equations, and a recurrent linear self-attention baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .tasks import RegressionTask

__all__ = [
    "ImplicitLinearModel",
    "GdConfig",
    "NewtonResult",
    "gd_weights",
    "gd_predict",
    "gd_predict_batch",
    "nonlinear_gd_predict",
    "nonlinear_gd_predict_batch",
    "newton_predict",
    "newton_predict_batch",
    "lsa_predict",
    "lsa_tokens",
    "lsa_gd_construction",
    "ETA_GRID",
    "tune_eta",
]

# Learning-rate grid for oracle baselines: 31 log-spaced points on [0.01, 2].
ETA_GRID = np.geomspace(0.01, 2.0, 31)


@dataclass
class ImplicitLinearModel:
    """The regression model a model's forward pass implicitly descends."""

    w: np.ndarray  # (f_out, f_in)
    link: str = "identity"  # "identity" or "sine"

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = self.w @ x
        return np.sin(out) if self.link == "sine" else out

    def context_loss(self, task: RegressionTask) -> float:
        """Mean squared residual over the context pairs (the descended loss)."""
        n = task.n_context
        preds = task.xs[:n] @ self.w.T
        if self.link == "sine":
            preds = np.sin(preds)
        return float(np.mean(np.sum((preds - task.ys[:n]) ** 2, axis=1)))


@dataclass
class GdConfig:
    """Mini-batch gradient descent settings on the implicit model."""

    eta: float = 1.0
    steps: int = 1
    l2_lambda: float = 0.0
    w0: np.ndarray | None = None  # (f_out, f_in), zeros when omitted


class NewtonResult(NamedTuple):
    prediction: np.ndarray
    used_pinv: bool


def _batch_stats(tasks: list[RegressionTask]):
    xs = np.stack([t.xs for t in tasks])  # (B, N+1, f_in)
    ys = np.stack([t.ys for t in tasks])  # (B, N+1, f_out)
    x_ctx, y_ctx, x_query = xs[:, :-1], ys[:, :-1], xs[:, -1]
    s_xx = np.einsum("bni,bnj->bij", x_ctx, x_ctx)
    s_yx = np.einsum("bni,bnj->bij", y_ctx, x_ctx)
    return x_ctx, y_ctx, x_query, s_xx, s_yx


def _init_w(tasks: list[RegressionTask], cfg: GdConfig) -> np.ndarray:
    b, f_out, f_in = len(tasks), tasks[0].f_out, tasks[0].f_in
    if cfg.w0 is None:
        return np.zeros((b, f_out, f_in))
    return np.broadcast_to(cfg.w0, (b, f_out, f_in)).copy()


def gd_weights_batch(tasks: list[RegressionTask], cfg: GdConfig) -> np.ndarray:
    """Implicit weights after cfg.steps full-context GD steps, one per task.

    Each step: W <- W - eta * [(1/N)(W S_xx - S_yx) + 2 l2 W].
    """
    _, _, _, s_xx, s_yx = _batch_stats(tasks)
    n = tasks[0].n_context
    w = _init_w(tasks, cfg)
    for _ in range(cfg.steps):
        grad = (w @ s_xx - s_yx) / n
        if cfg.l2_lambda != 0.0:
            grad = grad + (2.0 * cfg.l2_lambda) * w
        w = w - cfg.eta * grad
    return w


def gd_weights(task: RegressionTask, cfg: GdConfig) -> np.ndarray:
    return gd_weights_batch([task], cfg)[0]


def gd_predict_batch(tasks: list[RegressionTask], cfg: GdConfig) -> np.ndarray:
    w = gd_weights_batch(tasks, cfg)
    x_query = np.stack([t.query_x for t in tasks])
    return np.einsum("bij,bj->bi", w, x_query)


def gd_predict(task: RegressionTask, cfg: GdConfig) -> np.ndarray:
    """Query prediction of L-step GD on the implicit linear model."""
    return gd_predict_batch([task], cfg)[0]


def nonlinear_gd_predict_batch(
    tasks: list[RegressionTask],
    cfg: GdConfig,
    g: Callable[[np.ndarray], np.ndarray] = np.sin,
    g_prime: Callable[[np.ndarray], np.ndarray] = np.cos,
) -> np.ndarray:
    """GD on the link model g(W x); default link is the sine used by sine tasks."""
    x_ctx = np.stack([t.xs[:-1] for t in tasks])
    y_ctx = np.stack([t.ys[:-1] for t in tasks])
    x_query = np.stack([t.query_x for t in tasks])
    n = tasks[0].n_context
    w = _init_w(tasks, cfg)
    for _ in range(cfg.steps):
        pre = np.einsum("bij,bnj->bni", w, x_ctx)
        resid = (g(pre) - y_ctx) * g_prime(pre)
        grad = np.einsum("bni,bnj->bij", resid, x_ctx) / n
        if cfg.l2_lambda != 0.0:
            grad = grad + (2.0 * cfg.l2_lambda) * w
        w = w - cfg.eta * grad
    return g(np.einsum("bij,bj->bi", w, x_query))


def nonlinear_gd_predict(
    task: RegressionTask,
    cfg: GdConfig,
    g: Callable[[np.ndarray], np.ndarray] = np.sin,
    g_prime: Callable[[np.ndarray], np.ndarray] = np.cos,
) -> np.ndarray:
    return nonlinear_gd_predict_batch([task], cfg, g, g_prime)[0]


def newton_predict(task: RegressionTask, ridge: float = 1e-8) -> NewtonResult:
    """One Newton step from W=0, i.e. the ridge-regularized normal equations.

    On the quadratic loss a single Newton step reaches the minimizer
    W = S_yx (S_xx + ridge I)^{-1}. With ridge=0 and singular S_xx the
    pseudo-inverse (minimum-norm) solution is used and flagged.
    """
    _, _, x_query, s_xx, s_yx = _batch_stats([task])
    s_xx, s_yx, x_query = s_xx[0], s_yx[0], x_query[0]
    f = s_xx.shape[0]
    a = s_xx + ridge * np.eye(f)
    used_pinv = False
    if ridge == 0.0 and np.linalg.matrix_rank(s_xx) < f:
        w = s_yx @ np.linalg.pinv(s_xx)
        used_pinv = True
    else:
        # a is symmetric, so solving a w^T = s_yx^T gives w = s_yx a^{-1}.
        w = np.linalg.solve(a, s_yx.T).T
    return NewtonResult(prediction=w @ x_query, used_pinv=used_pinv)


def newton_predict_batch(tasks: list[RegressionTask], ridge: float = 1e-8) -> np.ndarray:
    if ridge <= 0.0:
        raise ValueError("batched Newton needs a positive ridge")
    _, _, x_query, s_xx, s_yx = _batch_stats(tasks)
    f = s_xx.shape[-1]
    a = s_xx + ridge * np.eye(f)
    w = np.swapaxes(np.linalg.solve(a, np.swapaxes(s_yx, -1, -2)), -1, -2)
    return np.einsum("bij,bj->bi", w, x_query)


def lsa_tokens(task: RegressionTask, layout: str = "interleaved") -> np.ndarray:
    """Token sequences for the linear self-attention baseline.

    "interleaved": x_1, y_1, ..., x_N, y_N, x_{N+1}, each zero-padded to
    f = max(f_in, f_out), the stream the windowed models consume.
    "paired": concatenated pairs [x_t; y_t] plus a query token [x_{N+1}; 0],
    the layout under which a hand construction reproduces one-step GD.
    """
    n, f_in, f_out = task.n_context, task.f_in, task.f_out
    if layout == "interleaved":
        f = max(f_in, f_out)
        toks = np.zeros((2 * n + 1, f))
        toks[0:2 * n:2, :f_in] = task.xs[:n]
        toks[1:2 * n:2, :f_out] = task.ys[:n]
        toks[-1, :f_in] = task.query_x
        return toks
    if layout == "paired":
        toks = np.zeros((n + 1, f_in + f_out))
        toks[:, :f_in] = task.xs
        toks[:n, f_in:] = task.ys[:n]
        return toks
    raise ValueError(f"unknown token layout {layout!r}")


def lsa_predict(
    task: RegressionTask,
    w_k: np.ndarray,
    w_q: np.ndarray,
    w_v: np.ndarray,
    layout: str = "interleaved",
) -> np.ndarray:
    """Recurrent linear self-attention over a token stream.

    State Z_t = Z_{t-1} + v(s_t) k(s_t)^T with v = W_v^T s, k = W_k^T s;
    the output at the final token is q(s_last)^T Z_last with q = W_q^T s.
    Returns the first f_out entries of that output.
    """
    toks = lsa_tokens(task, layout)
    d = toks.shape[1]
    for name, m in (("w_k", w_k), ("w_q", w_q), ("w_v", w_v)):
        if m.shape[0] != d:
            raise ValueError(f"{name} must have {d} rows for layout {layout!r}, got {m.shape}")
    vs = toks @ w_v  # (T, d_v)
    ks = toks @ w_k  # (T, d_k)
    z = vs.T @ ks    # sum of v k^T outer products over all tokens
    q = toks[-1] @ w_q
    out = q @ z
    return out[: task.f_out]


def lsa_gd_construction(f_in: int, f_out: int, eta: float, n_context: int):
    """Projections that make paired-layout LSA equal one-step GD exactly.

    v picks the input half of a pair token, k picks eta/N times the target
    half, q picks the input half of the query token; the query token's k is
    zero so the final state update is inert. On interleaved tokens no such
    construction exists: x and y never share a token, so single-token outer
    products contain no y x^T cross terms.
    """
    d = f_in + f_out
    w_v = np.zeros((d, f_in))
    w_v[:f_in, :] = np.eye(f_in)
    w_k = np.zeros((d, f_out))
    w_k[f_in:, :] = (eta / n_context) * np.eye(f_out)
    w_q = np.zeros((d, f_in))
    w_q[:f_in, :] = np.eye(f_in)
    return w_k, w_q, w_v


def tune_eta(
    tasks: list[RegressionTask],
    steps: int = 1,
    l2_lambda: float = 0.0,
    nonlinear: bool = False,
    grid: np.ndarray = ETA_GRID,
) -> tuple[float, float]:
    """Pick the grid learning rate minimizing mean squared query error.

    Run this on a held-out batch, not on the evaluation set itself.
    Returns (eta, loss at eta).
    """
    y_query = np.stack([t.query_y for t in tasks])
    best: tuple[float, float] | None = None
    for eta in grid:
        cfg = GdConfig(eta=float(eta), steps=steps, l2_lambda=l2_lambda)
        preds = (
            nonlinear_gd_predict_batch(tasks, cfg)
            if nonlinear
            else gd_predict_batch(tasks, cfg)
        )
        loss = float(np.mean(np.sum((preds - y_query) ** 2, axis=1)))
        if best is None or loss < best[1]:
            best = (float(eta), loss)
    return best
