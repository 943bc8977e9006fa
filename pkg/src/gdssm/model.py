"""Gated state-space layers whose constructed weights perform gradient descent.

The 1-D variant carries a vector state z_t = lambda * z_{t-1} + psi c_t over
context vectors c_t = [x_t y_t, x_{t+1}] and reads out beta * z_t^T theta c_t.
The N-D variant carries a matrix state Z_t = lambda * Z_{t-1} + C_t Q C_t^T
over sliding windows C_t = [x_t | y_t | x_{t+1}] and reads out
beta * Z_t (C_t q). With the constructed parameters below, the final output
equals one step of mini-batch GD on the implicit linear model; stacked
dual-head layers compose L steps exactly, and a GLU head on the state covers
the nonlinear-regression variant.

Sign convention: states accumulate the residual outer product
(W_0 x_t - y_t) x_t^T with W_0 = 0, so the single nonzero gate entry is -1
and beta = -eta/N; the product (-eta/N) * (-sum y x^T) reproduces the GD
prediction +(eta/N) sum y_i (x_i . x_query).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .tasks import (
    RegressionTask,
    batch_contexts_1d,
    batch_raw_1d,
    batch_windows,
)

__all__ = [
    "Ssm1dParams",
    "NdLayerParams",
    "GluHead",
    "SsmModel",
    "weighted_outer_sum",
    "construct_1d",
    "construct_nd",
    "construct_multilayer",
    "glu_identity",
    "forward_1d",
    "forward_nd",
    "forward_multilayer",
    "forward_nonlinear",
    "model_predict",
    "model_predict_batch",
    "model_outputs_batch",
    "model_inputs",
    "param_dict",
    "param_group",
    "params_to_tensors",
    "sensitivity",
    "analytic_sensitivity",
    "save_checkpoint",
    "load_checkpoint",
]

VARIANTS = ("1d", "nd", "multilayer", "nonlinear")
ABLATIONS = ("none", "input", "window", "skip")


@dataclass
class Ssm1dParams:
    psi: np.ndarray    # (f, 2f) input gate
    theta: np.ndarray  # (f, 2f) readout gate
    lam: np.ndarray    # (f,) elementwise state decay
    beta: np.ndarray   # (1,) output scale


@dataclass
class NdLayerParams:
    emb_x: np.ndarray  # (f, f) input-token embedding
    emb_y: np.ndarray  # (f, f) target-token embedding
    Q: np.ndarray      # (3, 3) window-mixing gate
    q: np.ndarray      # (3,) readout column selector
    lam: np.ndarray    # (f, f) elementwise state decay
    beta: np.ndarray   # (1,) output scale
    Q2: np.ndarray | None = None   # second head gate (multi-step variant)
    lam2: np.ndarray | None = None


@dataclass
class GluHead:
    """Gated linear unit w_out ((w1 z) * sigmoid(w2 z)) applied per state row."""

    w1: np.ndarray     # (h, f)
    w2: np.ndarray     # (h, f)
    w_out: np.ndarray  # (f, h)


@dataclass
class SsmModel:
    """A trainable model instance: variant, parameters, and wiring flags."""

    variant: str
    f: int
    n_context: int
    p1d: Ssm1dParams | None = None
    layers: list[NdLayerParams] = field(default_factory=list)
    glu: GluHead | None = None
    glu_placement: str = "state"   # "state" or "output"
    ablation: str = "none"         # none | input | window | skip
    skip: np.ndarray | None = None  # (f,) fixed readout, skip ablation only
    l2_lambda: float = 0.0

    @property
    def f_out(self) -> int:
        return 1 if self.variant == "1d" else self.f


# ---------------------------------------------------------------------------
# Constructions


def construct_1d(f: int, eta: float, n_context: int) -> Ssm1dParams:
    """Parameters under which the 1-D forward equals one-step GD.

    psi selects the (x_t y_t) half with weight -1 so the state accumulates
    the residual (0 - y_t) x_t; theta selects the x_{t+1} half.
    """
    psi = np.zeros((f, 2 * f))
    psi[:, :f] = -np.eye(f)
    theta = np.zeros((f, 2 * f))
    theta[:, f:] = np.eye(f)
    return Ssm1dParams(
        psi=psi,
        theta=theta,
        lam=np.ones(f),
        beta=np.array([-eta / n_context]),
    )


def construct_nd(f: int, eta: float, n_context: int, dual_head: bool = False) -> NdLayerParams:
    """Parameters under which the N-D forward equals one-step GD.

    Q has exactly one nonzero entry of magnitude 1 selecting the
    (y-column, x-column) pair with the residual sign; q picks the window's
    final column (the next input). The optional second head accumulates the
    input second moment sum x_t x_t^T for the multi-step composition.
    """
    gate = np.zeros((3, 3))
    gate[1, 0] = -1.0
    layer = NdLayerParams(
        emb_x=np.eye(f),
        emb_y=np.eye(f),
        Q=gate,
        q=np.array([0.0, 0.0, 1.0]),
        lam=np.ones((f, f)),
        beta=np.array([-eta / n_context]),
    )
    if dual_head:
        gate2 = np.zeros((3, 3))
        gate2[0, 0] = 1.0
        layer.Q2 = gate2
        layer.lam2 = np.ones((f, f))
    return layer


def construct_multilayer(f: int, eta: float, n_context: int, n_layers: int) -> list[NdLayerParams]:
    """Identical dual-head layers; L of them compose L GD steps exactly."""
    return [construct_nd(f, eta, n_context, dual_head=True) for _ in range(n_layers)]


def glu_identity(f: int) -> GluHead:
    """A GLU that is the identity map for every input.

    Rows pair +z and -z through the logistic gate: z sigmoid(z) + z sigmoid(-z)
    = z exactly, so the reduction to the linear forward holds to roundoff.
    """
    eye = np.eye(f)
    return GluHead(
        w1=np.vstack([eye, eye]),
        w2=np.vstack([eye, -eye]),
        w_out=np.hstack([eye, eye]),
    )


def weighted_outer_sum(c: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Explicit double sum sum_ij q_ij c[:,i] c[:,j]^T; equals c @ q @ c.T."""
    c = np.asarray(c, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if c.ndim != 2 or q.ndim != 2 or q.shape[0] != c.shape[1] or q.shape[0] != q.shape[1]:
        raise ValueError(f"incompatible shapes {c.shape} and {q.shape}")
    f, k = c.shape
    out = np.zeros((f, f))
    for i in range(k):
        for j in range(k):
            if q[i, j] != 0.0:
                out += q[i, j] * np.outer(c[:, i], c[:, j])
    return out


# ---------------------------------------------------------------------------
# Tensor-level forward cores (batched; no tape is built unless parameters
# require gradients)


def _glu_apply(glu: dict[str, Tensor], z: Tensor) -> Tensor:
    """Apply the GLU along the last axis (state rows or output vectors)."""
    h1 = z @ ad.transpose_last(glu["glu.w1"])
    h2 = z @ ad.transpose_last(glu["glu.w2"])
    return (h1 * ad.sigmoid(h2)) @ ad.transpose_last(glu["glu.w_out"])


def _core_1d(p: dict[str, Tensor], ctx: np.ndarray) -> Tensor:
    """1-D forward over (B, T, 2f) context rows; returns (B, T) outputs."""
    b, t_steps, _ = ctx.shape
    f = p["psi"].shape[0]
    psi_t = ad.transpose_last(p["psi"])
    theta_t = ad.transpose_last(p["theta"])
    z = ad.constant(np.zeros((b, f)))
    outs = []
    ctx_c = ad.constant(ctx)
    for t in range(t_steps):
        c = ad.select(ctx_c, 1, t)                  # (B, 2f)
        z = p["lambda"] * z + c @ psi_t             # (B, f)
        read = c @ theta_t                          # (B, f)
        outs.append(p["beta"] * ad.tsum(z * read, axis=-1))
    return ad.stack(outs, axis=1)


def _embed_columns(layer: dict[str, Tensor], windows: np.ndarray):
    """Embed all window columns in three batched matmuls."""
    ex0 = ad.constant(windows[:, :, :, 0]) @ ad.transpose_last(layer["emb_x"])
    ey = ad.constant(windows[:, :, :, 1]) @ ad.transpose_last(layer["emb_y"])
    ex2 = ad.constant(windows[:, :, :, 2]) @ ad.transpose_last(layer["emb_x"])
    return ex0, ey, ex2


def _window_at(ex0: Tensor, ey: Tensor, ex2: Tensor, t: int, ablation: str) -> Tensor:
    """Embedded window C_t, shape (B, f, 3)."""
    cur = ad.select(ex2, 1, t)
    if ablation == "window":
        # Window off: every column degenerates to the newest token.
        return ad.stack([cur, cur, cur], axis=-1)
    return ad.stack([ad.select(ex0, 1, t), ad.select(ey, 1, t), cur], axis=-1)


def _readout_vector(layer: dict[str, Tensor], c: Tensor, skip: Tensor | None,
                    b: int, f: int) -> Tensor:
    """C_t q, or the fixed learned vector when the output skip is ablated."""
    if skip is not None:
        return skip + ad.constant(np.zeros((b, f)))
    return ad.reshape(c @ ad.reshape(layer["q"], (3, 1)), (b, f))


def _core_nd(
    layers: list[dict[str, Tensor]],
    windows: np.ndarray,
    glu: dict[str, Tensor] | None = None,
    glu_placement: str = "state",
    ablation: str = "none",
    skip: Tensor | None = None,
    w0: np.ndarray | None = None,
    l2_lambda: float = 0.0,
    n_context: int | None = None,
) -> Tensor:
    """Shared N-D forward: single layer, GLU variants, and the multi-step stack.

    Returns per-step outputs (B, N, f). For len(layers) > 1 each layer needs
    a second head; the implicit weights are combined at every step as
    W_l = W_{l-1} + beta_l (W_{l-1} Ztilde_t + Z_t [+ 2 l2 N W_{l-1}]).
    """
    b, n_steps, f, _ = windows.shape
    multi = len(layers) > 1 or w0 is not None or l2_lambda != 0.0
    n = n_context if n_context is not None else n_steps
    embedded = [_embed_columns(layer, windows) for layer in layers]
    states = [ad.constant(np.zeros((b, f, f))) for _ in layers]
    states2 = [ad.constant(np.zeros((b, f, f))) for _ in layers]
    w_init = ad.constant(np.zeros((f, f)) if w0 is None else w0)
    outs = []
    for t in range(n_steps):
        c_last = None
        for li, layer in enumerate(layers):
            c = _window_at(*embedded[li], t, ablation)
            zinc = (c @ layer["Q"]) @ ad.transpose_last(c)
            states[li] = layer["lambda"] * states[li] + zinc
            if multi:
                if layer.get("Q2") is None:
                    raise ValueError("multi-step forward needs dual-head layers")
                zinc2 = (c @ layer["Q2"]) @ ad.transpose_last(c)
                states2[li] = layer["lambda2"] * states2[li] + zinc2
            c_last = c
        u = _readout_vector(layers[-1], c_last, skip, b, f)
        if multi:
            w = w_init
            for li, layer in enumerate(layers):
                delta = w @ states2[li] + states[li]
                if l2_lambda != 0.0:
                    delta = delta + (2.0 * l2_lambda * n) * w
                w = w + layer["beta"] * delta
            o = ad.reshape(w @ ad.reshape(u, (b, f, 1)), (b, f))
        else:
            state = states[0]
            if glu is not None and glu_placement == "state":
                state = _glu_apply(glu, state)
            o = layers[0]["beta"] * ad.reshape(state @ ad.reshape(u, (b, f, 1)), (b, f))
        if glu is not None and glu_placement == "output":
            o = _glu_apply(glu, o)
        outs.append(o)
    return ad.stack(outs, axis=1)


# ---------------------------------------------------------------------------
# Parameter plumbing


def _p1d_dict(p: Ssm1dParams) -> dict[str, np.ndarray]:
    return {"psi": p.psi, "theta": p.theta, "lambda": p.lam, "beta": p.beta}


def _layer_dict(layer: NdLayerParams) -> dict[str, np.ndarray]:
    d = {
        "emb_x": layer.emb_x,
        "emb_y": layer.emb_y,
        "Q": layer.Q,
        "q": layer.q,
        "lambda": layer.lam,
        "beta": layer.beta,
    }
    if layer.Q2 is not None:
        d["Q2"] = layer.Q2
        d["lambda2"] = layer.lam2
    return d


def param_dict(model: SsmModel) -> dict[str, np.ndarray]:
    """Flat name -> array view of every trainable tensor, in a fixed order."""
    out: dict[str, np.ndarray] = {}
    if model.variant == "1d":
        out.update(_p1d_dict(model.p1d))
    elif model.variant == "multilayer":
        for i, layer in enumerate(model.layers):
            for k, v in _layer_dict(layer).items():
                out[f"L{i}.{k}"] = v
    else:
        out.update(_layer_dict(model.layers[0]))
    if model.ablation == "skip":
        out.pop("q", None)
        out["skip"] = model.skip
    if model.glu is not None:
        out["glu.w1"] = model.glu.w1
        out["glu.w2"] = model.glu.w2
        out["glu.w_out"] = model.glu.w_out
    return out


def param_group(name: str) -> str:
    """Optimizer group: recurrence/gating at the base rate, the rest doubled."""
    leaf = name.split(".")[-1] if not name.startswith("glu.") else "glu"
    if leaf in ("emb_x", "emb_y", "glu"):
        return "global"
    return "ssm"


def params_to_tensors(model: SsmModel, requires_grad: bool) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=requires_grad) for k, v in param_dict(model).items()}


def _tensor_layers(model: SsmModel, tensors: dict[str, Tensor]) -> list[dict[str, Tensor]]:
    if model.variant == "multilayer":
        out = []
        for i in range(len(model.layers)):
            prefix = f"L{i}."
            out.append({k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)})
        return out
    layer = {k: v for k, v in tensors.items() if not k.startswith("glu.") and k != "skip"}
    return [layer]


def model_inputs(model: SsmModel, tasks: list[RegressionTask]) -> np.ndarray:
    if model.variant == "1d":
        return batch_raw_1d(tasks) if model.ablation == "input" else batch_contexts_1d(tasks)
    return batch_windows(tasks)


def model_outputs_batch(
    model: SsmModel,
    inputs: np.ndarray,
    tensors: dict[str, Tensor] | None = None,
) -> Tensor:
    """Per-step outputs for a batch of token inputs: (B, T) or (B, T, f)."""
    p = tensors if tensors is not None else params_to_tensors(model, requires_grad=False)
    if model.variant == "1d":
        return _core_1d(p, inputs)
    glu = {k: v for k, v in p.items() if k.startswith("glu.")} or None
    skip = p.get("skip")
    return _core_nd(
        _tensor_layers(model, p),
        inputs,
        glu=glu,
        glu_placement=model.glu_placement,
        ablation=model.ablation,
        skip=skip,
        l2_lambda=model.l2_lambda,
        n_context=model.n_context,
    )


def model_predict_batch(model: SsmModel, tasks: list[RegressionTask]) -> np.ndarray:
    """Query predictions, shape (B, f_out): the final per-step output."""
    outs = model_outputs_batch(model, model_inputs(model, tasks)).data
    if model.variant == "1d":
        return outs[:, -1:]
    return outs[:, -1, : tasks[0].f_out]


def model_predict(model: SsmModel, task: RegressionTask) -> np.ndarray:
    return model_predict_batch(model, [task])[0]


# ---------------------------------------------------------------------------
# Public single-task forwards over explicit parameter objects


def forward_1d(params: Ssm1dParams, contexts: np.ndarray) -> np.ndarray:
    """Per-step outputs o_1..o_T of the 1-D variant for (T, 2f) context rows."""
    p = {k: Tensor(v) for k, v in _p1d_dict(params).items()}
    return _core_1d(p, contexts[None]).data[0]


def forward_nd(layer: NdLayerParams, windows: np.ndarray) -> np.ndarray:
    """Per-step outputs (T, f) of the single-layer N-D variant."""
    tensors = {k: Tensor(v) for k, v in _layer_dict(layer).items()}
    tensors.pop("Q2", None)
    tensors.pop("lambda2", None)
    return _core_nd([tensors], windows[None]).data[0]


def forward_multilayer(
    layers: list[NdLayerParams],
    windows: np.ndarray,
    w0: np.ndarray | None = None,
    l2_lambda: float = 0.0,
    n_context: int | None = None,
) -> np.ndarray:
    """Per-step outputs of the stacked dual-head variant (L composed GD steps).

    The regularized variant shrinks the implicit weights on every layer via
    l2_lambda, matching GD on the L2-penalized loss. Pass n_context when the
    window count differs from the GD batch size the construction targets.
    """
    tensor_layers = [{k: Tensor(v) for k, v in _layer_dict(layer).items()} for layer in layers]
    f = windows.shape[1]
    w0_arr = np.zeros((f, f)) if w0 is None else w0
    return _core_nd(
        tensor_layers,
        windows[None],
        w0=w0_arr,
        l2_lambda=l2_lambda,
        n_context=n_context if n_context is not None else windows.shape[0],
    ).data[0]


def forward_nonlinear(
    layer: NdLayerParams,
    glu: GluHead,
    windows: np.ndarray,
    placement: str = "state",
) -> np.ndarray:
    """Single N-D layer with a GLU head on the state (default) or the output."""
    if placement not in ("state", "output"):
        raise ValueError(f"unknown GLU placement {placement!r}")
    tensors = {k: Tensor(v) for k, v in _layer_dict(layer).items()}
    tensors.pop("Q2", None)
    tensors.pop("lambda2", None)
    glu_t = {
        "glu.w1": Tensor(glu.w1),
        "glu.w2": Tensor(glu.w2),
        "glu.w_out": Tensor(glu.w_out),
    }
    return _core_nd([tensors], windows[None], glu=glu_t, glu_placement=placement).data[0]


# ---------------------------------------------------------------------------
# Sensitivity (Jacobian of the query prediction w.r.t. the query input)


def _with_query(task: RegressionTask, x_query: np.ndarray) -> RegressionTask:
    xs = task.xs.copy()
    xs[-1] = x_query
    return RegressionTask(kind=task.kind, xs=xs, ys=task.ys, w_true=task.w_true,
                          alpha=task.alpha)


def sensitivity(
    model: SsmModel | Callable[[RegressionTask], np.ndarray],
    task: RegressionTask,
    method: str = "central_fd",
    h: float = 1e-5,
) -> np.ndarray:
    """(f_out, f_in) Jacobian of the query prediction w.r.t. the query input.

    method "central_fd" works for any predictor; "analytic" requires a model
    whose readout is linear in the query (constructed gates, no GLU).
    """
    if method == "analytic":
        if not isinstance(model, SsmModel):
            raise ValueError("analytic sensitivity needs a model object")
        return analytic_sensitivity(model, task)
    if method != "central_fd":
        raise ValueError(f"unknown sensitivity method {method!r}")
    predict = model if callable(model) else (lambda t: model_predict(model, t))
    x0 = task.query_x
    f_in = x0.shape[0]
    cols = []
    for i in range(f_in):
        step = np.zeros(f_in)
        step[i] = h
        hi = predict(_with_query(task, x0 + step))
        lo = predict(_with_query(task, x0 - step))
        cols.append((np.atleast_1d(hi) - np.atleast_1d(lo)) / (2.0 * h))
    return np.stack(cols, axis=1)


def analytic_sensitivity(model: SsmModel, task: RegressionTask) -> np.ndarray:
    """Closed-form Jacobian for models whose output is linear in the query.

    1-D: beta * z_N^T theta_R, valid when psi's query half is zero.
    N-D: beta * q_3 * Z_N emb_x, valid when Q's third row and column are zero
    (the state never sees the query) and there is no GLU head.
    """
    if model.glu is not None:
        raise ValueError("analytic sensitivity undefined for a nonlinear head; use central_fd")
    if model.ablation != "none":
        raise ValueError("analytic sensitivity covers unablated models; use central_fd")
    inputs = model_inputs(model, [task])
    if model.variant == "1d":
        p = model.p1d
        f = model.f
        if np.any(p.psi[:, f:] != 0.0):
            raise ValueError("analytic path needs psi's query half to be zero; use central_fd")
        # Recompute the state only (readout gates do not matter for z).
        z = np.zeros(f)
        for row in inputs[0]:
            z = p.lam * z + p.psi @ row
        return (p.beta[0] * (z @ p.theta[:, f:]))[None, :]
    if model.variant != "nd":
        raise ValueError("analytic sensitivity covers plain 1d/nd models; use central_fd")
    layer = model.layers[0]
    if np.any(layer.Q[2, :] != 0.0) or np.any(layer.Q[:, 2] != 0.0):
        raise ValueError("analytic path needs Q's query row/column to be zero; use central_fd")
    windows = inputs[0]
    z = np.zeros((model.f, model.f))
    for t in range(windows.shape[0]):
        c = np.column_stack([
            layer.emb_x @ windows[t, :, 0],
            layer.emb_y @ windows[t, :, 1],
            layer.emb_x @ windows[t, :, 2],
        ])
        z = layer.lam * z + c @ layer.Q @ c.T
    jac = layer.beta[0] * layer.q[2] * (z @ layer.emb_x)
    return jac[: task.f_out, : task.f_in]


# ---------------------------------------------------------------------------
# Checkpoint serialization: CSV tensor dump + JSON metadata


def save_checkpoint(model: SsmModel, csv_path: str, meta_path: str,
                    extra_meta: dict | None = None) -> None:
    """Write (name, shape, row-major values) rows and a JSON metadata record.

    Values are serialized with repr so the round-trip is bit-exact.
    """
    with open(csv_path, "w", newline="") as fh:
        for name, arr in param_dict(model).items():
            shape = "x".join(str(s) for s in arr.shape)
            vals = ",".join(repr(float(v)) for v in np.asarray(arr).ravel())
            fh.write(f"{name},{shape},{vals}\n")
    meta = {
        "variant": model.variant,
        "f": model.f,
        "n_context": model.n_context,
        "n_layers": max(1, len(model.layers)),
        "glu_placement": model.glu_placement,
        "glu_hidden": 0 if model.glu is None else int(model.glu.w1.shape[0]),
        "ablation": model.ablation,
        "l2_lambda": model.l2_lambda,
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(csv_path: str, meta_path: str) -> SsmModel:
    with open(meta_path) as fh:
        meta = json.load(fh)
    arrays: dict[str, np.ndarray] = {}
    with open(csv_path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            name, shape_s, *vals = line.split(",")
            shape = tuple(int(s) for s in shape_s.split("x")) if shape_s else ()
            arrays[name] = np.array([float(v) for v in vals]).reshape(shape)
    model = _empty_model(meta)
    target = param_dict(model)
    if set(target) != set(arrays):
        missing = set(target) ^ set(arrays)
        raise ValueError(f"checkpoint/metadata tensor mismatch: {sorted(missing)}")
    for name, arr in arrays.items():
        target[name][...] = arr
    return model


def _empty_model(meta: dict) -> SsmModel:
    """Allocate a model skeleton matching checkpoint metadata."""
    variant = meta["variant"]
    f, n = int(meta["f"]), int(meta["n_context"])
    model = SsmModel(
        variant=variant,
        f=f,
        n_context=n,
        glu_placement=meta.get("glu_placement", "state"),
        ablation=meta.get("ablation", "none"),
        l2_lambda=float(meta.get("l2_lambda", 0.0)),
    )
    if variant == "1d":
        model.p1d = Ssm1dParams(
            psi=np.zeros((f, 2 * f)), theta=np.zeros((f, 2 * f)),
            lam=np.zeros(f), beta=np.zeros(1),
        )
        return model
    dual = variant == "multilayer"
    n_layers = int(meta.get("n_layers", 1)) if dual else 1
    for _ in range(n_layers):
        layer = NdLayerParams(
            emb_x=np.zeros((f, f)), emb_y=np.zeros((f, f)),
            Q=np.zeros((3, 3)), q=np.zeros(3),
            lam=np.zeros((f, f)), beta=np.zeros(1),
        )
        if dual:
            layer.Q2 = np.zeros((3, 3))
            layer.lam2 = np.zeros((f, f))
        model.layers.append(layer)
    if model.ablation == "skip":
        model.skip = np.zeros(f)
    if variant == "nonlinear" or int(meta.get("glu_hidden", 0)) > 0:
        h = int(meta["glu_hidden"])
        model.glu = GluHead(w1=np.zeros((h, f)), w2=np.zeros((h, f)), w_out=np.zeros((f, h)))
    return model
