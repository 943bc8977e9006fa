"""Training loop for the state-space models, with its own gradient checks.

Gradients come from the reverse-mode engine in autodiff.py; AdamW uses
decoupled weight decay; the learning rate follows linear warmup into cosine
annealing. Recurrence/gating parameters train at the base rate, embeddings
and the GLU head at twice that rate. Every randomized step draws from
streams keyed by (seed, purpose + index), so runs are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model as m
from .autodiff import Tensor
from . import autodiff as ad
from .numerics import RngStream
from .tasks import (
    RegressionTask,
    STREAM_EVAL_BASE,
    STREAM_PARAM_INIT,
    STREAM_TRAIN_BASE,
    sample_task,
)

__all__ = [
    "TrainConfig",
    "OptState",
    "TrainingDiverged",
    "GradCheckReport",
    "init_model",
    "loss_and_grads",
    "batch_loss",
    "grad_check",
    "adamw_step",
    "lr_at",
    "train",
    "eval_model",
    "HISTORY_HEADER",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

HISTORY_HEADER = "step,lr_ssm,lr_global,train_loss,eval_loss"

DIVERGENCE_CAP = 1e6


@dataclass
class TrainConfig:
    variant: str = "nd"            # 1d | nd | multilayer | nonlinear
    f: int = 10
    n_context: int = 10
    task_kind: str = "linear"
    alpha: float = 1.0
    batch_size: int = 64
    total_steps: int = 20_000
    lr_ssm: float = 1e-4
    lr_global: float = 2e-4
    weight_decay: float = 0.05
    warmup_steps: int = 0          # 0 picks 1% of total_steps
    seed: int = 0
    eval_every: int = 1000
    eval_tasks: int = 1000
    n_layers: int = 1
    glu_hidden: int = 0            # 0 picks 4*f
    glu_placement: str = "state"
    ablation: str = "none"
    init_scale: float = 0.02
    l2_lambda: float = 0.0         # weight penalty of the emulated objective

    @property
    def f_out(self) -> int:
        return 1 if self.variant == "1d" else self.f

    def resolved_warmup(self) -> int:
        return self.warmup_steps if self.warmup_steps > 0 else max(1, self.total_steps // 100)


@dataclass
class OptState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "OptState":
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
        )


class TrainingDiverged(RuntimeError):
    pass


def init_model(cfg: TrainConfig) -> m.SsmModel:
    """Random initialization: gates/embeddings/GLU ~ N(0, init_scale^2),
    decay at 1, output scale at -0.1."""
    if cfg.variant not in m.VARIANTS:
        raise ValueError(f"unknown variant {cfg.variant!r}")
    if cfg.ablation not in m.ABLATIONS:
        raise ValueError(f"unknown ablation {cfg.ablation!r}")
    if cfg.variant == "1d" and cfg.ablation in ("window", "skip"):
        raise ValueError("window/skip ablations apply to the windowed variant")
    if cfg.variant != "1d" and cfg.ablation == "input":
        raise ValueError("the input-construction ablation applies to the 1-D variant")
    f = cfg.f
    model = m.SsmModel(variant=cfg.variant, f=f, n_context=cfg.n_context,
                       glu_placement=cfg.glu_placement, ablation=cfg.ablation,
                       l2_lambda=cfg.l2_lambda)
    if cfg.variant == "1d":
        model.p1d = m.Ssm1dParams(
            psi=np.zeros((f, 2 * f)), theta=np.zeros((f, 2 * f)),
            lam=np.ones(f), beta=np.array([-0.1]),
        )
    else:
        dual = cfg.variant == "multilayer"
        n_layers = cfg.n_layers if dual else 1
        for _ in range(n_layers):
            layer = m.NdLayerParams(
                emb_x=np.zeros((f, f)), emb_y=np.zeros((f, f)),
                Q=np.zeros((3, 3)), q=np.zeros(3),
                lam=np.ones((f, f)), beta=np.array([-0.1]),
            )
            if dual:
                layer.Q2 = np.zeros((3, 3))
                layer.lam2 = np.ones((f, f))
            model.layers.append(layer)
        if cfg.ablation == "skip":
            model.skip = np.zeros(f)
        if cfg.variant == "nonlinear":
            h = cfg.glu_hidden if cfg.glu_hidden > 0 else 4 * f
            model.glu = m.GluHead(w1=np.zeros((h, f)), w2=np.zeros((h, f)),
                                  w_out=np.zeros((f, h)))
    rng = RngStream(cfg.seed, STREAM_PARAM_INIT)
    for name, arr in m.param_dict(model).items():
        leaf = name.split(".")[-1]
        if leaf in ("lambda", "lambda2"):
            continue  # decay starts at exactly 1
        if leaf == "beta":
            continue  # output scale starts at -0.1
        arr[...] = cfg.init_scale * rng.normal(arr.size).reshape(arr.shape)
    if model.glu is not None and model.glu.w1.shape[0] >= 2 * f:
        # Start the gated head at the identity map (plus the noise above) so
        # the model begins inside the linear variant's loss basin; a freshly
        # gated readout otherwise sits on a flat zero-output saddle.
        ident = m.glu_identity(f)
        model.glu.w1[: 2 * f] += ident.w1
        model.glu.w2[: 2 * f] += ident.w2
        model.glu.w_out[:, : 2 * f] += ident.w_out
    return model


def _targets(tasks: list[RegressionTask], f_out: int) -> np.ndarray:
    return np.stack([t.query_y for t in tasks])[:, :f_out]


def _loss_tensor(model: m.SsmModel, tasks: list[RegressionTask],
                 tensors: dict[str, Tensor]) -> Tensor:
    """Mean over the batch of the squared query residual norm."""
    inputs = m.model_inputs(model, tasks)
    outs = m.model_outputs_batch(model, inputs, tensors)
    last = ad.select(outs, 1, inputs.shape[1] - 1)  # (B,) or (B, f)
    y = _targets(tasks, model.f_out)
    if model.variant == "1d":
        resid = last - ad.constant(y[:, 0])
        return ad.tmean(resid * resid)
    resid = last - ad.constant(y)
    return ad.tmean(ad.tsum(resid * resid, axis=-1))


def batch_loss(model: m.SsmModel, tasks: list[RegressionTask]) -> float:
    """Loss without gradients (no tape is built)."""
    return _loss_tensor(model, tasks, m.params_to_tensors(model, False)).item()


def loss_and_grads(
    model: m.SsmModel, tasks: list[RegressionTask]
) -> tuple[float, dict[str, np.ndarray]]:
    tensors = m.params_to_tensors(model, requires_grad=True)
    loss = _loss_tensor(model, tasks, tensors)
    value = loss.item()
    if not math.isfinite(value):
        raise TrainingDiverged(f"non-finite loss {value}")
    loss.backward()
    grads = {
        k: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for k, t in tensors.items()
    }
    return value, grads


@dataclass
class GradCheckReport:
    max_rel_err: float
    worst: str                      # e.g. "Q[1,0]"
    per_tensor: dict[str, float]


def grad_check(model: m.SsmModel, tasks: list[RegressionTask],
               h: float = 1e-5) -> GradCheckReport:
    """Symmetric finite differences against the engine, every coordinate.

    Relative error uses max(|analytic|, |numeric|, 1e-8) as the scale so
    near-zero coordinates do not blow up the ratio.
    """
    _, grads = loss_and_grads(model, tasks)
    params = m.param_dict(model)
    worst = ("", -1.0)
    per_tensor: dict[str, float] = {}
    for name, arr in params.items():
        flat = arr.reshape(-1)
        tensor_worst = 0.0
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            hi = batch_loss(model, tasks)
            flat[i] = keep - h
            lo = batch_loss(model, tasks)
            flat[i] = keep
            fd = (hi - lo) / (2.0 * h)
            an = grads[name].reshape(-1)[i]
            rel = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
            if rel > tensor_worst:
                tensor_worst = rel
            if rel > worst[1]:
                idx = np.unravel_index(i, arr.shape)
                worst = (f"{name}[{','.join(str(j) for j in idx)}]", rel)
        per_tensor[name] = tensor_worst
    return GradCheckReport(max_rel_err=worst[1], worst=worst[0], per_tensor=per_tensor)


def lr_at(step: int, total_steps: int, warmup_steps: int, base: float) -> float:
    """Linear warmup to base over warmup_steps, then cosine annealing to 0."""
    if step < 0 or step > total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if warmup_steps > 0 and step < warmup_steps:
        return base * step / warmup_steps
    span = total_steps - warmup_steps
    if span <= 0:
        return base
    frac = (step - warmup_steps) / span
    return base * 0.5 * (1.0 + math.cos(math.pi * frac))


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    opt: OptState,
    lrs: dict[str, float],
    weight_decay: float,
) -> None:
    """One AdamW update in place; weight decay is decoupled from the moments."""
    opt.step += 1
    t = opt.step
    c1 = 1.0 - ADAM_BETA1**t
    c2 = 1.0 - ADAM_BETA2**t
    for name, p in params.items():
        g = grads[name]
        opt.m[name] = ADAM_BETA1 * opt.m[name] + (1.0 - ADAM_BETA1) * g
        opt.v[name] = ADAM_BETA2 * opt.v[name] + (1.0 - ADAM_BETA2) * g * g
        m_hat = opt.m[name] / c1
        v_hat = opt.v[name] / c2
        lr = lrs[name]
        p -= lr * (m_hat / (np.sqrt(v_hat) + ADAM_EPS) + weight_decay * p)


def _sample_batch(cfg: TrainConfig, base: int, count: int) -> list[RegressionTask]:
    return [
        sample_task(cfg.task_kind, cfg.f, cfg.f_out, cfg.n_context, cfg.alpha,
                    RngStream(cfg.seed, base + i))
        for i in range(count)
    ]


def eval_model(model: m.SsmModel, tasks: list[RegressionTask]) -> float:
    preds = m.model_predict_batch(model, tasks)
    y = _targets(tasks, model.f_out)
    return float(np.mean(np.sum((preds - y) ** 2, axis=1)))


def train(
    cfg: TrainConfig,
) -> tuple[m.SsmModel, list[tuple[int, float, float, float, float]]]:
    """Run the configured training; returns the model and the history rows.

    History rows (step, lr_ssm, lr_global, train_loss, eval_loss) are logged
    every eval_every steps and at the final step. The evaluation set is
    fixed up front from its own stream block, disjoint from training draws.
    """
    model = init_model(cfg)
    params = m.param_dict(model)
    groups = {name: m.param_group(name) for name in params}
    opt = OptState.for_params(params)
    warmup = cfg.resolved_warmup()
    eval_set = _sample_batch(cfg, STREAM_EVAL_BASE, cfg.eval_tasks)
    history: list[tuple[int, float, float, float, float]] = []

    def lrs_at(step: int) -> tuple[float, float]:
        scale = lr_at(step, cfg.total_steps, warmup, 1.0)
        return cfg.lr_ssm * scale, cfg.lr_global * scale

    if cfg.total_steps == 0:
        ev = eval_model(model, eval_set)
        history.append((0, 0.0, 0.0, ev, ev))
        return model, history

    for step in range(1, cfg.total_steps + 1):
        batch = _sample_batch(cfg, STREAM_TRAIN_BASE + (step - 1) * cfg.batch_size,
                              cfg.batch_size)
        loss, grads = loss_and_grads(model, batch)
        if loss > DIVERGENCE_CAP:
            norms = {k: float(np.linalg.norm(v)) for k, v in params.items()}
            raise TrainingDiverged(
                f"loss {loss:.3e} at step {step} (seed {cfg.seed}); parameter norms {norms}"
            )
        lr_ssm, lr_global = lrs_at(step)
        lrs = {name: (lr_ssm if groups[name] == "ssm" else lr_global) for name in params}
        adamw_step(params, grads, opt, lrs, cfg.weight_decay)
        if step % cfg.eval_every == 0 or step == cfg.total_steps:
            ev = eval_model(model, eval_set)
            history.append((step, lr_ssm, lr_global, loss, ev))
    return model, history


def write_history(path: str, rows: list[tuple[int, float, float, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(HISTORY_HEADER + "\n")
        for step, lr_s, lr_g, tl, ev in rows:
            fh.write(f"{step},{repr(float(lr_s))},{repr(float(lr_g))},"
                     f"{repr(float(tl))},{repr(float(ev))}\n")
