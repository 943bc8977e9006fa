"""Session fixtures for the acceptance suite.

The trained models here take minutes to produce, so each is built once per
session and shared across the tests that grade it. Everything is seeded and
stream-addressed; rerunning the suite reproduces the same numbers bit for bit.
"""

import time

import pytest

from gdssm import cli
from gdssm.metrics import eval_loss, make_eval_tasks, model_predictor
from gdssm.model import load_checkpoint
from gdssm.numerics import RngStream
from gdssm.oracles import tune_eta
from gdssm.tasks import STREAM_EVAL_BASE, STREAM_TUNE_BASE, sample_task
from gdssm.training import TrainConfig, train

DESK_F = 10
DESK_N = 10
DESK_STEPS = 20_000
EVAL_TASKS = 10_000


def tune_tasks(kind: str, f_out: int, count: int = 2000):
    return [
        sample_task(kind, DESK_F, f_out, DESK_N, 1.0, RngStream(0, STREAM_TUNE_BASE + i))
        for i in range(count)
    ]


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    """The default desk-scale training run, driven through the CLI.

    Returns the trained model, its artifact bytes (for the determinism
    check), the shared evaluation tasks, and the grid-tuned learning rate.
    """
    out = tmp_path_factory.mktemp("desk")
    argv = ["train", "--out-dir", str(out)]
    t0 = time.monotonic()
    code = cli.main(list(argv))
    wall = time.monotonic() - t0
    assert code == 0
    (history,) = out.glob("*_history.csv")
    rid = history.name.split("_")[0]
    model = load_checkpoint(str(out / f"{rid}_checkpoint.csv"),
                            str(out / f"{rid}_checkpoint.json"))
    artifacts = {
        name: (out / f"{rid}_{name}").read_bytes()
        for name in ("history.csv", "checkpoint.csv", "checkpoint.json")
    }
    tasks = make_eval_tasks("linear", DESK_F, DESK_F, DESK_N, 1.0, EVAL_TASKS, 0)
    eta, _ = tune_eta(tune_tasks("linear", DESK_F))
    loss, _ = eval_loss(model_predictor(model), tasks)
    return {
        "out": out, "argv": argv, "rid": rid, "wall": wall, "model": model,
        "artifacts": artifacts, "tasks": tasks, "eta": eta, "loss": loss,
    }


@pytest.fixture(scope="session")
def ablated(desk):
    """Ablated models trained at the same budget as the full desk run.

    The windowing and readout-skip ablations live in the windowed variant and
    are graded against the desk model. The input-construction ablation lives
    in the scalar variant, so it is graded against a full scalar-variant run
    on the same scalar-target tasks.
    """
    tasks_1d = make_eval_tasks("linear", DESK_F, 1, DESK_N, 1.0, EVAL_TASKS, 0)

    def run(variant: str, ablation: str, tasks):
        cfg = TrainConfig(variant=variant, ablation=ablation, f=DESK_F,
                          n_context=DESK_N, total_steps=DESK_STEPS, seed=0)
        model, _ = train(cfg)
        loss, _ = eval_loss(model_predictor(model), tasks)
        return loss

    return {
        "full_1d": run("1d", "none", tasks_1d),
        "input": run("1d", "input", tasks_1d),
        "window": run("nd", "window", desk["tasks"]),
        "skip": run("nd", "skip", desk["tasks"]),
        "full_nd": desk["loss"],
    }


@pytest.fixture(scope="session")
def sine_run():
    """Gated nonlinear model trained on sine tasks, plus the tuned linear
    one-step-GD oracle evaluated on the same tasks."""
    tasks = make_eval_tasks("sine", DESK_F, DESK_F, DESK_N, 1.0, EVAL_TASKS, 0)
    eta, _ = tune_eta(tune_tasks("sine", DESK_F))
    cfg = TrainConfig(variant="nonlinear", task_kind="sine", f=DESK_F,
                      n_context=DESK_N, total_steps=DESK_STEPS, seed=0,
                      glu_placement="output")
    model, _ = train(cfg)
    loss, _ = eval_loss(model_predictor(model), tasks)
    return {"tasks": tasks, "eta": eta, "model": model, "loss": loss}
