import numpy as np
import pytest

from gdssm.metrics import (
    RESULT_HEADER,
    Predictor,
    ResultRow,
    compare_predictions,
    constructed_1d_predictor,
    constructed_multilayer_predictor,
    constructed_nd_predictor,
    eval_loss,
    gd_predictor,
    lsa_gd_predictor,
    make_eval_tasks,
    model_predictor,
    newton_predictor,
    nonlinear_gd_predictor,
    param_alignment,
    sensitivity_similarity,
    sweep,
    write_results_csv,
    zero_predictor,
)
from gdssm.model import SsmModel, construct_1d, construct_nd
from gdssm.oracles import GdConfig, gd_predict


class TestEvalLoss:
    def test_zero_predictor_matches_the_target_second_moment(self):
        """E||y||^2 = f_out * f_in * alpha^2 / 9 on linear tasks: each target
        coordinate is w.x with w standard normal and x uniform(-alpha, alpha),
        so Var = sum_j E[w_j^2] E[x_j^2] = f_in alpha^2/3... times E[w^2]=1."""
        f = 6
        tasks = make_eval_tasks("linear", f, f, 8, 1.0, 4000, 0)
        mean, sem = eval_loss(zero_predictor(f), tasks)
        expected = f * f / 3.0
        assert abs(mean - expected) < 2.5 * sem

    def test_constructed_and_oracle_agree_on_shared_tasks(self):
        tasks = make_eval_tasks("linear", 4, 4, 6, 1.0, 50, 1)
        m_ssm, _ = eval_loss(constructed_nd_predictor(4, 0.8, 6), tasks)
        m_gd, _ = eval_loss(gd_predictor(0.8), tasks)
        assert m_ssm == pytest.approx(m_gd, abs=1e-12)

    def test_single_task_has_zero_sem(self):
        tasks = make_eval_tasks("linear", 2, 2, 3, 1.0, 1, 0)
        _, sem = eval_loss(zero_predictor(2), tasks)
        assert sem == 0.0

    def test_predictor_without_batch_path_is_stacked(self):
        tasks = make_eval_tasks("linear", 3, 3, 4, 1.0, 8, 2)
        single_only = Predictor(tag="gd-oracle(1)",
                                predict=lambda t: gd_predict(t, GdConfig(eta=0.5)))
        a, _ = eval_loss(single_only, tasks)
        b, _ = eval_loss(gd_predictor(0.5), tasks)
        assert a == pytest.approx(b, abs=1e-14)


class TestComparePredictions:
    def test_self_comparison_is_exactly_zero(self):
        tasks = make_eval_tasks("linear", 3, 3, 5, 1.0, 20, 0)
        p = constructed_nd_predictor(3, 1.0, 5)
        report = compare_predictions(p, p, tasks)
        assert report.mean_l2 == 0.0 and report.max_l2 == 0.0
        assert report.n_tasks == 20
        assert report.mean_target_norm > 0.0

    def test_distinct_predictors_differ(self):
        tasks = make_eval_tasks("linear", 3, 3, 6, 1.0, 20, 0)
        report = compare_predictions(gd_predictor(1.0), newton_predictor(), tasks)
        assert report.max_l2 >= report.mean_l2 > 0.0

    def test_construction_tracks_the_oracle(self):
        tasks = make_eval_tasks("linear", 4, 4, 6, 1.0, 30, 3)
        report = compare_predictions(constructed_nd_predictor(4, 0.7, 6),
                                     gd_predictor(0.7), tasks)
        assert report.max_l2 < 1e-12


class TestSensitivitySimilarity:
    def test_constructed_vs_oracle_cosine_is_one(self):
        tasks = make_eval_tasks("linear", 4, 4, 6, 1.0, 25, 0)
        report = sensitivity_similarity(constructed_nd_predictor(4, 0.9, 6),
                                        gd_predictor(0.9), tasks)
        assert report.mean_cosine == pytest.approx(1.0, abs=1e-10)
        assert report.mean_l2 < 1e-10
        assert report.n_undefined == 0

    def test_negated_predictor_has_cosine_minus_one(self):
        tasks = make_eval_tasks("linear", 3, 3, 5, 1.0, 10, 1)
        p = gd_predictor(0.8)
        negated = Predictor(
            tag="zero",
            predict=lambda t: -p.predict(t),
            jacobian=lambda t: -p.jac(t),
        )
        report = sensitivity_similarity(p, negated, tasks)
        assert report.mean_cosine == pytest.approx(-1.0, abs=1e-12)

    def test_zero_jacobians_are_excluded_and_counted(self):
        tasks = make_eval_tasks("linear", 3, 3, 5, 1.0, 7, 2)
        report = sensitivity_similarity(zero_predictor(3), gd_predictor(1.0), tasks)
        assert report.mean_cosine is None
        assert report.n_undefined == 7
        assert report.n_tasks == 7
        assert report.mean_l2 > 0.0

    def test_scalar_variant_jacobians_compare(self):
        tasks = make_eval_tasks("linear", 4, 1, 6, 1.0, 10, 0)
        report = sensitivity_similarity(constructed_1d_predictor(4, 1.2, 6),
                                        gd_predictor(1.2), tasks)
        assert report.mean_cosine == pytest.approx(1.0, abs=1e-8)


class TestSweep:
    def test_alpha_sweep_keeps_construction_on_the_oracle(self):
        factories = {
            "constructed-gdssm": lambda f, a: constructed_nd_predictor(f, 1.0, 5),
            "gd-oracle": lambda f, a: gd_predictor(1.0),
        }
        rows = sweep("alpha", factories, [0.5, 1.0, 2.0], f=3, n_context=5,
                     n_tasks=40, seed=0)
        assert len(rows) == 6
        by_alpha: dict[float, dict[str, float]] = {}
        for r in rows:
            by_alpha.setdefault(r.alpha, {})[r.predictor] = r.value
        for alpha, pair in by_alpha.items():
            assert pair["constructed-gdssm"] == pytest.approx(
                pair["gd-oracle(1)"], abs=1e-10
            )

    def test_dimension_sweep_resizes_the_predictors(self):
        factories = {
            "constructed-gdssm": lambda f, a: constructed_nd_predictor(f, 0.9, 5),
            "gd-oracle": lambda f, a: gd_predictor(0.9),
        }
        rows = sweep("dimension", factories, [2, 4], n_context=5, n_tasks=30, seed=1)
        fs = sorted({r.f for r in rows})
        assert fs == [2, 4]
        for r in rows:
            assert r.alpha == 1.0
            assert r.metric == "eval_loss"
            assert r.sem >= 0.0

    def test_loss_grows_with_alpha(self):
        rows = sweep("alpha", {"zero": lambda f, a: zero_predictor(f)},
                     [0.5, 1.0, 2.0], f=3, n_context=5, n_tasks=200, seed=0)
        vals = [r.value for r in rows]
        assert vals[0] < vals[1] < vals[2]

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="sweep"):
            sweep("eta", {}, [1.0])


class TestParamAlignment:
    def nd_model(self, eta=1.0):
        return SsmModel(variant="nd", f=3, n_context=4,
                        layers=[construct_nd(3, eta, 4)])

    def test_self_alignment_is_perfect(self):
        a = self.nd_model()
        rows = param_alignment(a, a)
        names = {r.name for r in rows}
        assert {"Q", "q", "lambda", "beta", "emb_x", "emb_y"} == names
        for r in rows:
            assert r.cosine == pytest.approx(1.0, abs=1e-12)
            assert r.distance == pytest.approx(0.0, abs=1e-12)

    def test_scale_differences_are_normalized_away(self):
        a, b = self.nd_model(eta=0.1), self.nd_model(eta=1.7)
        for r in param_alignment(a, b):
            assert r.cosine == pytest.approx(1.0, abs=1e-12)

    def test_paired_sign_flips_are_normalized_away(self):
        a, b = self.nd_model(), self.nd_model()
        b.layers[0].Q *= -1.0
        b.layers[0].beta *= -1.0
        for r in param_alignment(a, b):
            assert r.cosine == pytest.approx(1.0, abs=1e-12), r.name

    def test_zero_tensor_reports_undefined_cosine_and_unit_distance(self):
        a, b = self.nd_model(), self.nd_model()
        b.layers[0].Q[...] = 0.0
        row = {r.name: r for r in param_alignment(a, b)}["Q"]
        assert row.cosine is None
        assert row.distance == 1.0

    def test_only_identically_shaped_shared_tensors_compare(self):
        a = self.nd_model()
        b = SsmModel(variant="1d", f=3, n_context=4, p1d=construct_1d(3, 1.0, 4))
        rows = param_alignment(a, b)
        # the scalar decay of the 1-D variant never aligns with the matrix one
        assert {r.name for r in rows} == {"beta"}


class TestResultCsv:
    def test_format_and_undefined_handling(self, tmp_path):
        rows = [
            ResultRow("zero", "eval_loss", 3, 5, 1.0, 0, 0.5, 0.01),
            ResultRow("trained-gdssm", "sensitivity_cosine_mean", 3, 5, 2.0, 1,
                      None, None),
        ]
        path = tmp_path / "r.csv"
        write_results_csv(rows, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == RESULT_HEADER
        assert lines[1] == "zero,eval_loss,3,5,1.0,0,0.5,0.01"
        assert lines[2] == "trained-gdssm,sensitivity_cosine_mean,3,5,2.0,1,undefined,undefined"

    def test_identical_rows_are_byte_identical_files(self, tmp_path):
        tasks = make_eval_tasks("linear", 3, 3, 5, 1.0, 30, 0)
        mean, sem = eval_loss(gd_predictor(1.0), tasks)
        rows = [ResultRow("gd-oracle(1)", "eval_loss", 3, 5, 1.0, 0, mean, sem)]
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_results_csv(rows, str(pa))
        write_results_csv(rows, str(pb))
        assert pa.read_bytes() == pb.read_bytes()


class TestPredictorFactories:
    def test_tags_follow_the_naming_scheme(self):
        assert zero_predictor(3).tag == "zero"
        assert gd_predictor(1.0, steps=2).tag == "gd-oracle(2)"
        assert nonlinear_gd_predictor(1.0).tag == "nonlinear-gd-oracle(1)"
        assert newton_predictor().tag == "newton"
        assert constructed_nd_predictor(3, 1.0, 5).tag == "constructed-gdssm"
        assert lsa_gd_predictor(3, 3, 1.0, 5).tag == "lsa"

    def test_lsa_predictor_matches_the_oracle(self):
        tasks = make_eval_tasks("linear", 3, 2, 5, 1.0, 20, 0)
        a, _ = eval_loss(lsa_gd_predictor(3, 2, 0.8, 5), tasks)
        b, _ = eval_loss(gd_predictor(0.8), tasks)
        assert a == pytest.approx(b, abs=1e-12)

    def test_multilayer_predictor_composes_steps(self):
        tasks = make_eval_tasks("linear", 3, 3, 6, 1.0, 15, 0)
        a, _ = eval_loss(constructed_multilayer_predictor(3, 0.4, 6, 3), tasks)
        b, _ = eval_loss(gd_predictor(0.4, steps=3), tasks)
        assert a == pytest.approx(b, abs=1e-9)

    def test_nonlinear_oracle_jacobian_matches_finite_differences(self):
        from gdssm.model import sensitivity

        (task,) = make_eval_tasks("sine", 3, 3, 5, 1.0, 1, 4)
        p = nonlinear_gd_predictor(0.9, steps=2)
        fd = sensitivity(p.predict, task)
        np.testing.assert_allclose(p.jac(task), fd, atol=1e-7)

    def test_model_predictor_wraps_analytic_jacobian_fallback(self):
        from gdssm.training import TrainConfig, init_model

        model = init_model(TrainConfig(variant="nd", f=3, n_context=4, seed=0,
                                       init_scale=0.5))
        p = model_predictor(model)
        assert p.tag == "trained-gdssm"
        tasks = make_eval_tasks("linear", 3, 3, 4, 1.0, 3, 0)
        jac = p.jac(tasks[0])
        assert jac.shape == (3, 3)
        assert np.all(np.isfinite(jac))
