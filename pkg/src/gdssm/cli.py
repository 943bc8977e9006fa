"""Config-driven experiment runner.

Commands: verify, train, eval, ablate, sweep, compare. Configuration is a
flat ``key = value`` file with ``#`` comments and dotted keys for grouping;
any key can be overridden on the command line with ``--key value`` (hyphens
map to underscores, so ``--n-context 7`` sets ``n_context``). Unknown keys
are rejected.

Every run writes a JSON manifest first (status "running") and finalizes it
on exit; all CSV artifacts carry the run id in their filename so each row is
traceable to the manifest that produced it. Given the same config and seed,
reruns produce byte-identical CSV and checkpoint files (the manifest differs
only in its wall-clock fields).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import metrics as mt
from . import model as mdl
from . import oracles
from . import training as tr
from .numerics import RngStream
from .tasks import STREAM_EVAL_BASE, STREAM_TUNE_BASE, sample_task

__all__ = ["main", "ConfigError", "parse_config_text", "resolve_config",
           "verify_battery", "COMMANDS"]

COMMANDS = ("verify", "train", "eval", "ablate", "sweep", "compare")

VERIFY_HEADER = "property,value,threshold,status"
ALIGNMENT_HEADER = "tensor,cosine,distance"

# key -> (caster, default). Dotted prefixes group related knobs; everything
# stays flat and overridable.
SCHEMA: dict[str, tuple[type, object]] = {
    "seed": (int, 0),
    "out_dir": (str, "runs"),
    "f": (int, 10),
    "n_context": (int, 10),
    "alpha": (float, 1.0),
    "task_kind": (str, "linear"),          # linear | sine

    "train.variant": (str, "nd"),          # 1d | nd | multilayer | nonlinear
    "train.total_steps": (int, 20_000),
    "train.batch_size": (int, 64),
    "train.lr_ssm": (float, 1e-4),
    "train.lr_global": (float, 2e-4),
    "train.weight_decay": (float, 0.05),
    "train.warmup_steps": (int, 0),        # 0 picks 1% of total_steps
    "train.eval_every": (int, 1000),
    "train.eval_tasks": (int, 1000),
    "train.n_layers": (int, 1),
    "train.glu_hidden": (int, 0),          # 0 picks 4*f
    "train.glu_placement": (str, "state"),  # state | output
    "train.ablation": (str, "none"),       # none | input | window | skip
    "train.init_scale": (float, 0.02),
    "train.l2_lambda": (float, 0.0),

    "oracle.eta": (float, 0.0),            # 0 tunes on a held-out grid
    "oracle.steps": (int, 1),
    "oracle.ridge": (float, 1e-8),
    "oracle.l2_lambda": (float, 0.0),
    "oracle.tune_tasks": (int, 2000),

    "eval.n_tasks": (int, 10_000),
    "eval.predictors": (str, "auto"),
    "eval.checkpoint": (str, ""),          # path to a checkpoint .csv

    "compare.a": (str, "constructed-gdssm"),
    "compare.b": (str, "gd-oracle"),
    "compare.n_tasks": (int, 1000),
    "compare.sensitivity_tasks": (int, 200),

    "sweep.kind": (str, "alpha"),          # alpha | dimension
    "sweep.values": (str, "0.5,1.0,2.0"),
    "sweep.n_tasks": (int, 2000),

    "ablate.total_steps": (int, 4000),
    "ablate.n_tasks": (int, 5000),

    "verify.seeds": (int, 20),
    "verify.etas": (str, "0.1,1.0"),
    "verify.dims": (str, "1,2,5,10"),
    "verify.contexts": (str, "1,2,5,20"),
    "verify.layers": (str, "2,3,4"),
    "verify.outer_trials": (int, 1000),
}

# Bare flags accepted as shorthand for commonly overridden dotted keys.
ALIASES = {
    "variant": "train.variant",
    "total_steps": "train.total_steps",
    "ablation": "train.ablation",
    "checkpoint": "eval.checkpoint",
    "eta": "oracle.eta",
    "steps": "oracle.steps",
}


class ConfigError(Exception):
    pass


def _normalize_key(key: str) -> str:
    key = key.replace("-", "_")
    return ALIASES.get(key, key)


def parse_config_text(text: str) -> dict[str, str]:
    """Flat `key = value` lines; `#` starts a comment; blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = _normalize_key(key.strip())
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key in {raw.strip()!r}")
        out[key] = value
    return out


def parse_overrides(tokens: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"expected a --key, got {tok!r}")
        body = tok[2:]
        if "=" in body:
            key, value = body.split("=", 1)
            i += 1
        else:
            key = body
            if i + 1 >= len(tokens):
                raise ConfigError(f"flag --{key} is missing a value")
            value = tokens[i + 1]
            i += 2
        out[_normalize_key(key)] = value
    return out


def resolve_config(file_kv: dict[str, str],
                   override_kv: dict[str, str] | None = None) -> dict:
    """Apply defaults, file values, then overrides; reject unknown keys."""
    cfg = {key: default for key, (_, default) in SCHEMA.items()}
    for source in (file_kv, override_kv or {}):
        for key, value in source.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            caster = SCHEMA[key][0]
            try:
                cfg[key] = caster(value)
            except ValueError:
                raise ConfigError(
                    f"key {key!r}: cannot parse {value!r} as {caster.__name__}"
                ) from None
    return cfg


def canonical_config_lines(cfg: dict) -> list[str]:
    return [f"{k} = {cfg[k]!r}" for k in sorted(cfg)]


def run_id_for(command: str, cfg: dict) -> str:
    payload = command + "\n" + "\n".join(canonical_config_lines(cfg))
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _float_list(s: str) -> list[float]:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {s!r} as a comma-separated float list") from None


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {s!r} as a comma-separated int list") from None


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_manifest(path: str, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_train_config(cfg: dict) -> tr.TrainConfig:
    return tr.TrainConfig(
        variant=cfg["train.variant"],
        f=cfg["f"],
        n_context=cfg["n_context"],
        task_kind=cfg["task_kind"],
        alpha=cfg["alpha"],
        batch_size=cfg["train.batch_size"],
        total_steps=cfg["train.total_steps"],
        lr_ssm=cfg["train.lr_ssm"],
        lr_global=cfg["train.lr_global"],
        weight_decay=cfg["train.weight_decay"],
        warmup_steps=cfg["train.warmup_steps"],
        seed=cfg["seed"],
        eval_every=cfg["train.eval_every"],
        eval_tasks=cfg["train.eval_tasks"],
        n_layers=cfg["train.n_layers"],
        glu_hidden=cfg["train.glu_hidden"],
        glu_placement=cfg["train.glu_placement"],
        ablation=cfg["train.ablation"],
        init_scale=cfg["train.init_scale"],
        l2_lambda=cfg["train.l2_lambda"],
    )


def resolve_eta(cfg: dict, f_out: int, nonlinear: bool = False) -> tuple[float, bool]:
    """Configured learning rate, or the grid-tuned one on held-out tasks."""
    if cfg["oracle.eta"] > 0:
        return cfg["oracle.eta"], False
    tasks = [
        sample_task(cfg["task_kind"], cfg["f"], f_out, cfg["n_context"], cfg["alpha"],
                    RngStream(cfg["seed"], STREAM_TUNE_BASE + i))
        for i in range(cfg["oracle.tune_tasks"])
    ]
    eta, _ = oracles.tune_eta(tasks, steps=cfg["oracle.steps"],
                              l2_lambda=cfg["oracle.l2_lambda"], nonlinear=nonlinear)
    return eta, True


def _load_trained(cfg: dict) -> mdl.SsmModel | None:
    path = cfg["eval.checkpoint"]
    if not path:
        return None
    if not path.endswith(".csv"):
        raise ConfigError(f"eval.checkpoint must point to the checkpoint .csv, got {path!r}")
    meta = path[:-4] + ".json"
    if not os.path.exists(path) or not os.path.exists(meta):
        raise ConfigError(f"checkpoint files not found: {path} / {meta}")
    return mdl.load_checkpoint(path, meta)


def predictor_for(tag: str, cfg: dict, f_out: int, eta: float,
                  eta_nl: float | None = None,
                  trained: mdl.SsmModel | None = None) -> mt.Predictor:
    f, n = cfg["f"], cfg["n_context"]
    steps = cfg["oracle.steps"]
    if tag == "zero":
        return mt.zero_predictor(f_out)
    if tag == "gd-oracle":
        return mt.gd_predictor(eta, steps, cfg["oracle.l2_lambda"])
    if tag == "nonlinear-gd-oracle":
        return mt.nonlinear_gd_predictor(eta if eta_nl is None else eta_nl, steps)
    if tag == "newton":
        return mt.newton_predictor(cfg["oracle.ridge"])
    if tag == "constructed-gdssm":
        if steps > 1:
            return mt.constructed_multilayer_predictor(f, eta, n, steps)
        if f_out == 1 and f > 1:
            return mt.constructed_1d_predictor(f, eta, n)
        return mt.constructed_nd_predictor(f, eta, n)
    if tag == "trained-gdssm":
        if trained is None:
            raise ConfigError("predictor trained-gdssm needs eval.checkpoint")
        return mt.model_predictor(trained)
    if tag == "lsa":
        return mt.lsa_gd_predictor(f, f_out, eta, n)
    raise ConfigError(f"unknown predictor tag {tag!r}")


# ---------------------------------------------------------------------------
# verify


def verify_battery(cfg: dict) -> list[tuple[str, float, float]]:
    """Deterministic identity checks: (property, measured value, threshold).

    Covers construction-vs-oracle equality for all variants, the state-update
    outer-product identity, the gated-head pairing identity, the attention
    construction, gradient checks for every variant and ablation, and the
    closed-form query sensitivity.
    """
    seed, n_seeds = cfg["seed"], cfg["verify.seeds"]
    etas = _float_list(cfg["verify.etas"])
    dims = _int_list(cfg["verify.dims"])
    ctxs = _int_list(cfg["verify.contexts"])
    if cfg["f"] not in dims:
        dims = dims + [cfg["f"]]
    if cfg["n_context"] not in ctxs:
        ctxs = ctxs + [cfg["n_context"]]
    f0, n0 = cfg["f"], cfg["n_context"]
    rows: list[tuple[str, float, float]] = []

    def tasks_for(f: int, n: int, f_out: int, count: int = n_seeds, offset: int = 0):
        return [
            sample_task("linear", f, f_out, n, 1.0,
                        RngStream(seed, STREAM_EVAL_BASE + offset + i))
            for i in range(count)
        ]

    dev = 0.0
    for f in dims:
        for n in ctxs:
            tasks = tasks_for(f, n, 1)
            for eta in etas:
                model = mdl.SsmModel(variant="1d", f=f, n_context=n,
                                     p1d=mdl.construct_1d(f, eta, n))
                p = mdl.model_predict_batch(model, tasks)
                g = oracles.gd_predict_batch(tasks, oracles.GdConfig(eta=eta))
                dev = max(dev, float(np.max(np.abs(p - g))))
    rows.append(("construct_1d_matches_gd", dev, 1e-10))

    dev = 0.0
    for f in dims:
        for n in ctxs:
            tasks = tasks_for(f, n, f)
            for eta in etas:
                model = mdl.SsmModel(variant="nd", f=f, n_context=n,
                                     layers=[mdl.construct_nd(f, eta, n)])
                p = mdl.model_predict_batch(model, tasks)
                g = oracles.gd_predict_batch(tasks, oracles.GdConfig(eta=eta))
                dev = max(dev, float(np.max(np.abs(p - g))))
    rows.append(("construct_nd_matches_gd", dev, 1e-10))

    for n_layers in _int_list(cfg["verify.layers"]):
        dev = 0.0
        for f in dims:
            for n in ctxs:
                tasks = tasks_for(f, n, f)
                for eta in etas:
                    model = mdl.SsmModel(
                        variant="multilayer", f=f, n_context=n,
                        layers=mdl.construct_multilayer(f, eta, n, n_layers))
                    p = mdl.model_predict_batch(model, tasks)
                    g = oracles.gd_predict_batch(
                        tasks, oracles.GdConfig(eta=eta, steps=n_layers))
                    dev = max(dev, float(np.max(np.abs(p - g))))
        rows.append((f"construct_multilayer_{n_layers}_matches_gd", dev, 1e-9))

    rng = RngStream(seed, STREAM_EVAL_BASE + 999_983)
    dev = 0.0
    for _ in range(cfg["verify.outer_trials"]):
        c = rng.normal(18).reshape(6, 3)
        q = rng.normal(9).reshape(3, 3)
        direct = c @ q @ c.T
        summed = mdl.weighted_outer_sum(c, q)
        dev = max(dev, float(np.max(np.abs(direct - summed))))
    rows.append(("state_update_outer_sum_identity", dev, 1e-14))

    tasks = tasks_for(f0, n0, f0)
    linear = mdl.SsmModel(variant="nd", f=f0, n_context=n0,
                          layers=[mdl.construct_nd(f0, 1.0, n0)])
    gated = mdl.SsmModel(variant="nonlinear", f=f0, n_context=n0,
                         layers=[mdl.construct_nd(f0, 1.0, n0)],
                         glu=mdl.glu_identity(f0), glu_placement="state")
    dev = float(np.max(np.abs(mdl.model_predict_batch(gated, tasks)
                              - mdl.model_predict_batch(linear, tasks))))
    rows.append(("glu_pairing_identity", dev, 1e-10))

    tasks1 = tasks_for(1, n0, 1)
    scalar = mdl.SsmModel(variant="1d", f=1, n_context=n0,
                          p1d=mdl.construct_1d(1, 1.0, n0))
    windowed = mdl.SsmModel(variant="nd", f=1, n_context=n0,
                            layers=[mdl.construct_nd(1, 1.0, n0)])
    dev = float(np.max(np.abs(mdl.model_predict_batch(scalar, tasks1)
                              - mdl.model_predict_batch(windowed, tasks1))))
    rows.append(("windowed_reduces_to_scalar_variant", dev, 1e-12))

    eta = etas[-1]
    tasks = tasks_for(f0, n0, f0)
    att = mt.lsa_gd_predictor(f0, f0, eta, n0)
    g = oracles.gd_predict_batch(tasks, oracles.GdConfig(eta=eta))
    dev = float(np.max(np.abs(att.batch(tasks) - g)))
    rows.append(("attention_construction_matches_gd", dev, 1e-10))

    checks = [("1d", "none"), ("nd", "none"), ("multilayer", "none"),
              ("nonlinear", "none"), ("1d", "input"), ("nd", "window"),
              ("nd", "skip")]
    for variant, ablation in checks:
        # init_scale 0.5: near-zero parameters make the FD quotient noise-
        # dominated; the check needs a well-conditioned point, not a tiny one.
        tcfg = tr.TrainConfig(variant=variant, f=3, n_context=4, seed=seed,
                              n_layers=2 if variant == "multilayer" else 1,
                              ablation=ablation, init_scale=0.5)
        model = tr.init_model(tcfg)
        gtasks = tasks_for(3, 4, tcfg.f_out, count=2, offset=50_000)
        rep = tr.grad_check(model, gtasks)
        label = variant if ablation == "none" else f"{variant}_{ablation}_ablation"
        rows.append((f"grad_check_{label}", rep.max_rel_err, 1e-4))

    model = mdl.SsmModel(variant="nd", f=f0, n_context=n0,
                         layers=[mdl.construct_nd(f0, eta, n0)])
    dev = 0.0
    for task in tasks_for(f0, n0, f0, count=3, offset=60_000):
        exact = mdl.analytic_sensitivity(model, task)
        fd = mdl.sensitivity(model, task)
        dev = max(dev, float(np.max(np.abs(exact - fd))))
    rows.append(("analytic_sensitivity_matches_fd", dev, 1e-6))

    return rows


def write_verify_csv(rows: list[tuple[str, float, float]], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(VERIFY_HEADER + "\n")
        for name, value, threshold in rows:
            status = "pass" if value <= threshold else "fail"
            fh.write(f"{name},{repr(value)},{repr(threshold)},{status}\n")


# ---------------------------------------------------------------------------
# commands (each returns (artifact paths, manifest extras, exit code))


def cmd_verify(cfg: dict, rid: str, out_dir: str):
    rows = verify_battery(cfg)
    path = os.path.join(out_dir, f"{rid}_verify.csv")
    write_verify_csv(rows, path)
    for name, value, threshold in rows:
        if value > threshold:
            print(f"verify failed: {name} value={value!r} threshold={threshold!r}",
                  file=sys.stderr)
            return [path], {"failed_property": name}, 1
    worst = max(rows, key=lambda r: r[1] / r[2])
    print(f"verify ok: {len(rows)} properties, worst margin {worst[0]} "
          f"({worst[1]:.3e} vs {worst[2]:.0e})")
    return [path], {}, 0


def cmd_train(cfg: dict, rid: str, out_dir: str):
    tcfg = build_train_config(cfg)
    model, history = tr.train(tcfg)
    hist = os.path.join(out_dir, f"{rid}_history.csv")
    ck_csv = os.path.join(out_dir, f"{rid}_checkpoint.csv")
    ck_json = os.path.join(out_dir, f"{rid}_checkpoint.json")
    tr.write_history(hist, history)
    mdl.save_checkpoint(model, ck_csv, ck_json,
                        extra_meta={"run_id": rid, "config_hash": rid,
                                    "seed": cfg["seed"]})
    print(f"train ok: final eval loss {history[-1][4]!r} after {history[-1][0]} steps")
    return [hist, ck_csv, ck_json], {}, 0


def cmd_eval(cfg: dict, rid: str, out_dir: str):
    trained = _load_trained(cfg)
    f, n = cfg["f"], cfg["n_context"]
    f_out = 1 if (trained is not None and trained.variant == "1d") else f
    eta, tuned = resolve_eta(cfg, f_out)
    chosen = {"gd-oracle": {"eta": eta, "tuned": tuned}}
    tags = cfg["eval.predictors"]
    if tags == "auto":
        tags = ("zero,gd-oracle,nonlinear-gd-oracle" if cfg["task_kind"] == "sine"
                else "zero,gd-oracle,newton,constructed-gdssm,lsa")
    tag_list = [t.strip() for t in tags.split(",") if t.strip()]
    if trained is not None and "trained-gdssm" not in tag_list:
        tag_list.append("trained-gdssm")
    eta_nl = None
    if "nonlinear-gd-oracle" in tag_list:
        eta_nl, tuned_nl = resolve_eta(cfg, f_out, nonlinear=True)
        chosen["nonlinear-gd-oracle"] = {"eta": eta_nl, "tuned": tuned_nl}
    tasks = mt.make_eval_tasks(cfg["task_kind"], f, f_out, n, cfg["alpha"],
                               cfg["eval.n_tasks"], cfg["seed"])
    rows = []
    for tag in tag_list:
        predictor = predictor_for(tag, cfg, f_out, eta, eta_nl, trained)
        mean, sem = mt.eval_loss(predictor, tasks)
        rows.append(mt.ResultRow(predictor.tag, "eval_loss", f, n, cfg["alpha"],
                                 cfg["seed"], mean, sem))
        print(f"eval {predictor.tag}: loss {mean!r} (sem {sem!r})")
    path = os.path.join(out_dir, f"{rid}_results.csv")
    mt.write_results_csv(rows, path)
    return [path], {"chosen_eta": chosen}, 0


def cmd_compare(cfg: dict, rid: str, out_dir: str):
    trained = _load_trained(cfg)
    f, n = cfg["f"], cfg["n_context"]
    a_tag, b_tag = cfg["compare.a"], cfg["compare.b"]
    f_out = 1 if (trained is not None and trained.variant == "1d") else f
    eta, tuned = resolve_eta(cfg, f_out)
    chosen = {"gd-oracle": {"eta": eta, "tuned": tuned}}
    pa = predictor_for(a_tag, cfg, f_out, eta, trained=trained)
    pb = predictor_for(b_tag, cfg, f_out, eta, trained=trained)
    n_all = max(cfg["compare.n_tasks"], cfg["compare.sensitivity_tasks"])
    tasks = mt.make_eval_tasks(cfg["task_kind"], f, f_out, n, cfg["alpha"],
                               n_all, cfg["seed"])
    rep = mt.compare_predictions(pa, pb, tasks[: cfg["compare.n_tasks"]])
    srep = mt.sensitivity_similarity(pa, pb, tasks[: cfg["compare.sensitivity_tasks"]])
    pair = f"{pa.tag}-vs-{pb.tag}"
    alpha, seed = cfg["alpha"], cfg["seed"]
    rows = [
        mt.ResultRow(pair, "prediction_l2_mean", f, n, alpha, seed, rep.mean_l2, None),
        mt.ResultRow(pair, "prediction_l2_max", f, n, alpha, seed, rep.max_l2, None),
        mt.ResultRow(pair, "target_norm_mean", f, n, alpha, seed,
                     rep.mean_target_norm, None),
        mt.ResultRow(pair, "sensitivity_cosine_mean", f, n, alpha, seed,
                     srep.mean_cosine, None),
        mt.ResultRow(pair, "sensitivity_l2_mean", f, n, alpha, seed,
                     srep.mean_l2, None),
        mt.ResultRow(pair, "sensitivity_undefined_count", f, n, alpha, seed,
                     float(srep.n_undefined), None),
    ]
    path = os.path.join(out_dir, f"{rid}_results.csv")
    mt.write_results_csv(rows, path)
    artifacts = [path]
    print(f"compare {pair}: prediction L2 mean {rep.mean_l2!r}, "
          f"sensitivity cosine {srep.mean_cosine!r}")
    if (trained is not None and trained.variant == "nd"
            and {"trained-gdssm", "constructed-gdssm"} == {a_tag, b_tag}):
        reference = mdl.SsmModel(
            variant="nd", f=trained.f, n_context=trained.n_context,
            layers=[mdl.construct_nd(trained.f, eta, trained.n_context)])
        align_path = os.path.join(out_dir, f"{rid}_alignment.csv")
        with open(align_path, "w", newline="") as fh:
            fh.write(ALIGNMENT_HEADER + "\n")
            for row in mt.param_alignment(trained, reference):
                cos = "undefined" if row.cosine is None else repr(row.cosine)
                fh.write(f"{row.name},{cos},{repr(row.distance)}\n")
        artifacts.append(align_path)
    return artifacts, {"chosen_eta": chosen}, 0


def cmd_sweep(cfg: dict, rid: str, out_dir: str):
    kind = cfg["sweep.kind"]
    if kind not in ("alpha", "dimension"):
        raise ConfigError(f"sweep.kind must be alpha or dimension, got {kind!r}")
    values = _float_list(cfg["sweep.values"])
    if not values:
        raise ConfigError("sweep.values is empty")
    trained = _load_trained(cfg)
    f, n = cfg["f"], cfg["n_context"]
    eta, tuned = resolve_eta(cfg, f)
    steps, l2 = cfg["oracle.steps"], cfg["oracle.l2_lambda"]
    factories = {
        "zero": lambda fv, av: mt.zero_predictor(fv),
        "gd-oracle": lambda fv, av: mt.gd_predictor(eta, steps, l2),
        "constructed-gdssm": lambda fv, av: mt.constructed_nd_predictor(fv, eta, n),
    }
    if trained is not None:
        if kind == "dimension":
            raise ConfigError("a trained checkpoint only applies to the alpha sweep")
        factories["trained-gdssm"] = lambda fv, av: mt.model_predictor(trained)
    rows = mt.sweep(kind, factories, values, task_kind=cfg["task_kind"], f=f,
                    n_context=n, n_tasks=cfg["sweep.n_tasks"], seed=cfg["seed"])
    path = os.path.join(out_dir, f"{rid}_results.csv")
    mt.write_results_csv(rows, path)
    print(f"sweep {kind} over {values}: {len(rows)} rows")
    return [path], {"chosen_eta": {"gd-oracle": {"eta": eta, "tuned": tuned}}}, 0


def cmd_ablate(cfg: dict, rid: str, out_dir: str):
    variant = cfg["train.variant"]
    if variant not in ("nd", "1d"):
        raise ConfigError(f"ablate applies to train.variant nd or 1d, got {variant!r}")
    ablations = ["none", "window", "skip"] if variant == "nd" else ["none", "input"]
    f, n = cfg["f"], cfg["n_context"]
    f_out = 1 if variant == "1d" else f
    alpha, seed = cfg["alpha"], cfg["seed"]
    base = build_train_config(cfg)
    base = replace(base, total_steps=cfg["ablate.total_steps"])
    tasks = mt.make_eval_tasks(cfg["task_kind"], f, f_out, n, alpha,
                               cfg["ablate.n_tasks"], seed)
    rows, artifacts, losses = [], [], {}
    for ablation in ablations:
        tcfg = replace(base, ablation=ablation)
        model, _ = tr.train(tcfg)
        tag = "trained-gdssm" if ablation == "none" else f"trained-gdssm[{ablation}]"
        mean, sem = mt.eval_loss(mt.model_predictor(model, tag=tag), tasks)
        losses[ablation] = mean
        rows.append(mt.ResultRow(tag, "eval_loss", f, n, alpha, seed, mean, sem))
        ck_csv = os.path.join(out_dir, f"{rid}_checkpoint_{ablation}.csv")
        ck_json = os.path.join(out_dir, f"{rid}_checkpoint_{ablation}.json")
        mdl.save_checkpoint(model, ck_csv, ck_json,
                            extra_meta={"run_id": rid, "seed": seed})
        artifacts.extend([ck_csv, ck_json])
        print(f"ablate {tag}: loss {mean!r}")
    eta, tuned = resolve_eta(cfg, f_out)
    oracle = mt.gd_predictor(eta, cfg["oracle.steps"], cfg["oracle.l2_lambda"])
    mean, sem = mt.eval_loss(oracle, tasks)
    rows.append(mt.ResultRow(oracle.tag, "eval_loss", f, n, alpha, seed, mean, sem))
    mean, sem = mt.eval_loss(mt.zero_predictor(f_out), tasks)
    rows.append(mt.ResultRow("zero", "eval_loss", f, n, alpha, seed, mean, sem))
    for ablation in ablations[1:]:
        rows.append(mt.ResultRow(f"trained-gdssm[{ablation}]", "loss_ratio_vs_full",
                                 f, n, alpha, seed,
                                 losses[ablation] / losses["none"], None))
    path = os.path.join(out_dir, f"{rid}_results.csv")
    mt.write_results_csv(rows, path)
    return [path] + artifacts, {"chosen_eta": {"gd-oracle": {"eta": eta, "tuned": tuned}}}, 0


DISPATCH = {
    "verify": cmd_verify,
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gdssm",
        description="Gated state-space models that emulate gradient descent "
                    "on in-context regression tasks.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None, help="path to a key = value file")
    ns, rest = parser.parse_known_args(sys.argv[1:] if argv is None else list(argv))
    try:
        file_kv = {}
        if ns.config is not None:
            try:
                with open(ns.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config file {ns.config!r}: {exc}") from None
            file_kv = parse_config_text(text)
        cfg = resolve_config(file_kv, parse_overrides(rest))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    rid = run_id_for(ns.command, cfg)
    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(out_dir, f"{rid}_manifest.json")
    started = _utc_now()
    t0 = time.perf_counter()
    manifest = {
        "run_id": rid,
        "command": ns.command,
        "version": __version__,
        "status": "running",
        "config": {k: cfg[k] for k in sorted(cfg)},
        "chosen_eta": None,
        "started_utc": started,
        "finished_utc": None,
        "wall_clock_s": None,
        "artifacts": [],
    }
    _write_manifest(manifest_path, manifest)

    code = 0
    artifacts: list[str] = []
    try:
        artifacts, extras, code = DISPATCH[ns.command](cfg, rid, out_dir)
        if "chosen_eta" in extras:
            manifest["chosen_eta"] = extras.pop("chosen_eta")
        manifest.update(extras)
        manifest["status"] = "ok" if code == 0 else f"failed (exit {code})"
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        manifest["status"] = f"failed: config: {exc}"
        code = 2
    except (ValueError, tr.TrainingDiverged) as exc:
        kind = "diverged" if isinstance(exc, tr.TrainingDiverged) else "error"
        print(f"run failed ({kind}): {exc}", file=sys.stderr)
        manifest["status"] = f"failed: {kind}: {exc}"
        code = 1

    manifest["finished_utc"] = _utc_now()
    manifest["wall_clock_s"] = round(time.perf_counter() - t0, 3)
    manifest["artifacts"] = sorted(os.path.basename(a) for a in artifacts)
    _write_manifest(manifest_path, manifest)
    if code == 0:
        print(f"run {rid} ({ns.command}) ok; manifest {manifest_path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
