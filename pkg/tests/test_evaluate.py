import numpy as np
import pytest

from tpqi import evaluate
from tpqi.evaluate import (DatasetManifest, LogisticParams, QualityReport,
                           evaluate_manifest, fit_logistic, fuse, load_manifest,
                           logistic_apply, plcc_rmse, srcc)


class TestFuse:
    def test_sum(self):
        assert fuse(3.0, 2.0, "sum") == 5.0

    def test_product(self):
        assert fuse(3.0, 2.0, "product") == 6.0

    def test_product_absorbing_zero(self):
        assert fuse(17.3, 0.0, "product") == 0.0

    def test_symmetry_and_monotonicity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a, b = rng.random(2) * 5 + 0.1
            assert fuse(a, b, "sum") == fuse(b, a, "sum")
            assert fuse(a, b, "product") == fuse(b, a, "product")
            assert fuse(a + 0.5, b, "sum") > fuse(a, b, "sum")
            assert fuse(a + 0.5, b, "product") > fuse(a, b, "product")

    def test_nonpositive_temporal_warns_under_product(self, caplog):
        with caplog.at_level("WARNING"):
            fuse(2.0, -0.5, "product")
        assert "monotone" in caplog.text


class TestSrcc:
    def test_identical_order(self):
        assert srcc([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0, abs=1e-12)

    def test_reversed_order(self):
        assert srcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_computed_example(self):
        assert abs(srcc([1, 2, 3, 4, 5], [1, 3, 2, 5, 4]) - 0.8) < 1e-12

    def test_constant_list_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            srcc([1, 1, 1], [1, 2, 3])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.standard_normal(30)
            b = rng.standard_normal(30)
            base = srcc(a, b)
            for f in (lambda x: 3 * x + 1, np.exp, lambda x: x**3):
                assert srcc(f(a), b) == pytest.approx(base, abs=1e-12)

    def test_ties_use_average_ranks(self):
        # b has a tie; average ranks keep the value strictly inside (0, 1)
        rho = srcc([1, 2, 3, 4], [1, 2, 2, 3])
        assert 0.9 < rho < 1.0


class TestLogistic:
    def test_generate_and_recover(self):
        pred = np.linspace(-6, 6, 50)
        true = LogisticParams(5.0, 1.0, 0.0, 2.0)
        mos = logistic_apply(true, pred)
        fit = fit_logistic(pred, mos)
        rmse = np.sqrt(np.mean((logistic_apply(fit, pred) - mos) ** 2))
        assert rmse < 1e-3

    def test_constant_mos_perfect_fit(self):
        pred = np.linspace(0, 1, 8)
        fit = fit_logistic(pred, np.full(8, 2.5))
        np.testing.assert_allclose(logistic_apply(fit, pred), 2.5, atol=1e-12)

    def test_parameterization_not_identifiable_curve_is(self):
        # beta4 enters through its absolute value, so (b1,b2,b3,b4) and
        # (b1,b2,b3,-b4) draw the same curve; only fit quality is contractual.
        pred = np.linspace(-3, 3, 25)
        a = LogisticParams(4.0, 1.0, 0.3, 1.2)
        b = LogisticParams(4.0, 1.0, 0.3, -1.2)
        np.testing.assert_array_equal(logistic_apply(a, pred), logistic_apply(b, pred))
        fit = fit_logistic(pred, logistic_apply(a, pred))
        np.testing.assert_allclose(logistic_apply(fit, pred), logistic_apply(a, pred),
                                   atol=1e-6)

    def test_inverse_relation_absorbed(self):
        mos = np.array([1.0, 1.8, 2.5, 3.1, 4.0, 4.6, 5.0])
        pred = -mos
        fit = fit_logistic(pred, mos)
        plcc, rmse = plcc_rmse(logistic_apply(fit, pred), mos)
        assert plcc > 0.9999
        assert rmse < 1e-4

    def test_degenerate_predictor_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            fit_logistic(np.ones(6), np.linspace(1, 5, 6))


class TestPlccRmse:
    def test_perfect_agreement(self):
        plcc, rmse = plcc_rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert plcc == 1.0 and rmse == 0.0

    def test_constant_offset(self):
        plcc, rmse = plcc_rmse([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
        assert abs(plcc - 1.0) < 1e-12
        assert abs(rmse - 1.0) < 1e-12

    def test_two_point_anticorrelation(self):
        plcc, _ = plcc_rmse([0.0, 1.0], [1.0, 0.0])
        assert abs(plcc + 1.0) < 1e-12

    def test_constant_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            plcc_rmse([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def make_reports(scores, field="q_tpqi"):
    reports = []
    for i, s in enumerate(scores):
        r = QualityReport(source_id=f"v{i}")
        setattr(r, field, float(s))
        reports.append(r)
    return reports


class TestEvaluateManifest:
    def test_perfect_predictor(self):
        mos = [1.0, 2.0, 3.0, 4.0, 5.0]
        manifest = DatasetManifest([(f"v{i}", m) for i, m in enumerate(mos)])
        rho, plcc, rmse, _ = evaluate_manifest(manifest, make_reports(mos), "tpqi")
        assert rho == pytest.approx(1.0, abs=1e-12)
        assert plcc > 0.99999
        assert rmse < 1e-4

    def test_negated_predictor_srcc_sign(self):
        mos = [1.0, 2.2, 3.1, 4.4, 5.0]
        manifest = DatasetManifest([(f"v{i}", m) for i, m in enumerate(mos)])
        rho, plcc, _, _ = evaluate_manifest(manifest, make_reports([-m for m in mos]))
        assert rho == pytest.approx(-1.0, abs=1e-12)
        assert plcc > 0.9999

    def test_random_permutation_near_zero(self):
        rng = np.random.default_rng(2)
        mos = np.linspace(1, 5, 100)
        pred = rng.permutation(mos)
        manifest = DatasetManifest([(f"v{i}", m) for i, m in enumerate(mos)])
        rho, _, _, _ = evaluate_manifest(manifest, make_reports(pred))
        assert abs(rho) < 0.25

    def test_missing_report_lists_ids(self):
        manifest = DatasetManifest([("a", 1.0), ("b", 2.0), ("c", 3.0), ("d", 4.0)])
        reports = make_reports([1, 2, 3])
        reports = [QualityReport(source_id=s, q_tpqi=1.0 + i)
                   for i, s in enumerate(["a", "b"])]
        with pytest.raises(ValueError, match="c, d"):
            evaluate_manifest(manifest, reports)

    def test_score_field_missing_value(self):
        manifest = DatasetManifest([(f"v{i}", float(i)) for i in range(4)])
        with pytest.raises(ValueError, match="niqe"):
            evaluate_manifest(manifest, make_reports([1, 2, 3, 4]), "niqe")


class TestManifestIO:
    def test_load_with_header_and_comments(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("# comment\npath,mos\na.y4m,3.5\nb.y4m,2.0\nc.y4m,4.0\nd.y4m,1.0\n")
        m = load_manifest(p)
        assert m.entries[0] == ("a.y4m", 3.5)
        assert len(m.entries) == 4

    def test_too_few_entries(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("path,mos\na,1\nb,2\n")
        with pytest.raises(ValueError, match=">= 4"):
            load_manifest(p)

    def test_rmse_bounded_by_constant_predictor(self):
        rng = np.random.default_rng(3)
        pred = rng.standard_normal(30)
        mos = rng.random(30) * 4 + 1
        fit = fit_logistic(pred, mos)
        _, rmse = plcc_rmse(logistic_apply(fit, pred), mos)
        assert rmse <= np.std(mos) + 1e-9
