"""Evaluation statistics against hand oracles and exact algebra."""

from fractions import Fraction

import numpy as np
import pytest

from forestfill import (
    BiasKind,
    DataMatrix,
    DegenerateCorrelation,
    DegenerateNrmse,
    InvalidInput,
    MetricsRecord,
    MissingMask,
    ScenarioKind,
    SeedSpec,
    ShapeError,
    SingularDesign,
    ZeroDenominator,
    coef_relative_bias,
    generate_scenario,
    metrics_csv_row,
    metrics_header,
    nrmse,
    ols_fit,
    pearson,
    relative_bias_mean,
    relative_bias_sd,
    scenario_mvn,
    scenario_truth,
)

# (mean, covariance) per scenario as exact rationals, (Y, X1, X2) order.
EXACT_MVN = {
    ScenarioKind.UNCORRELATED: (
        (Fraction(2), Fraction(1), Fraction(1)),
        (
            (Fraction(21), Fraction(10), Fraction(10)),
            (Fraction(10), Fraction(10), Fraction(0)),
            (Fraction(10), Fraction(0), Fraction(10)),
        ),
    ),
    ScenarioKind.WEAK: (
        (Fraction(1), Fraction(1), Fraction(1)),
        (
            (Fraction(10), Fraction(5, 2), Fraction(5, 2)),
            (Fraction(5, 2), Fraction(10), Fraction(5, 2)),
            (Fraction(5, 2), Fraction(5, 2), Fraction(10)),
        ),
    ),
    ScenarioKind.STRONG: (
        (Fraction(1), Fraction(1), Fraction(1)),
        (
            (Fraction(10), Fraction(15, 2), Fraction(15, 2)),
            (Fraction(15, 2), Fraction(10), Fraction(15, 2)),
            (Fraction(15, 2), Fraction(15, 2), Fraction(10)),
        ),
    ),
}


def conditional_oracle(mean, cov):
    """Exact-rational conditional of Y given (X1, X2) via a 2x2 solve."""
    a, b = cov[1][1], cov[1][2]
    c, d = cov[0][1], cov[0][2]
    det = a * a - b * b
    beta1 = (a * c - b * d) / det
    beta2 = (a * d - b * c) / det
    intercept = mean[0] - beta1 * mean[1] - beta2 * mean[2]
    resid = cov[0][0] - beta1 * c - beta2 * d
    return (intercept, beta1, beta2), resid


class TestScenarioTruth:
    @pytest.mark.parametrize("kind", list(ScenarioKind))
    def test_coefs_match_exact_solve(self, kind):
        mean, cov = EXACT_MVN[kind]
        coefs, resid = conditional_oracle(mean, cov)
        truth = scenario_truth(kind)
        assert truth.true_coefs == tuple(float(c) for c in coefs)
        assert truth.true_resid_var == float(resid)
        assert truth.true_means == tuple(float(m) for m in mean)
        assert truth.true_sds == tuple(float(cov[i][i]) ** 0.5 for i in range(3))

    def test_expected_closed_forms(self):
        assert scenario_truth(ScenarioKind.UNCORRELATED).true_coefs == (0.0, 1.0, 1.0)
        assert scenario_truth(ScenarioKind.WEAK).true_coefs == (0.6, 0.2, 0.2)
        assert scenario_truth(ScenarioKind.STRONG).true_coefs == (
            1.0 / 7.0,
            3.0 / 7.0,
            3.0 / 7.0,
        )

    @pytest.mark.parametrize("kind", list(ScenarioKind))
    def test_generator_spec_agrees_with_truth(self, kind):
        mean, cov = EXACT_MVN[kind]
        spec = scenario_mvn(kind)
        assert np.array_equal(spec.mean, np.array(mean, dtype=float))
        assert np.array_equal(spec.cov, np.array(cov, dtype=float))

    def test_complete_data_ols_recovers_truth(self):
        # Large n so the 0.05 box is many standard errors wide.
        data = generate_scenario(ScenarioKind.STRONG, 20_000, SeedSpec(303))
        X = np.column_stack([np.ones(20_000), data.values[:, 1], data.values[:, 2]])
        fit = ols_fit(X, data.values[:, 0])
        truth = scenario_truth(ScenarioKind.STRONG).true_coefs
        assert np.all(np.abs(fit.coef - np.array(truth)) < 0.05)


class TestBiasMetrics:
    def test_mean_bias_hand_value(self):
        assert relative_bias_mean([2.0, 4.0], [1.0, 3.0]) == 0.5

    def test_mean_bias_zero_denominator(self):
        with pytest.raises(ZeroDenominator):
            relative_bias_mean([1.0, 2.0], [-1.0, 1.0])

    def test_sd_bias_hand_value(self):
        assert relative_bias_sd([0.0, 4.0], [0.0, 2.0]) == 1.0

    def test_sd_bias_constant_truth(self):
        with pytest.raises(ZeroDenominator):
            relative_bias_sd([0.0, 1.0], [3.0, 3.0])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            relative_bias_mean([1.0], [1.0, 2.0])


class TestOls:
    def test_exact_line(self):
        X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
        fit = ols_fit(X, np.array([1.0, 3.0, 5.0]))
        assert fit.coef == pytest.approx([1.0, 2.0], abs=1e-12)
        assert fit.rss == pytest.approx(0.0, abs=1e-24)

    def test_matches_lstsq(self):
        rng = np.random.default_rng(9)
        X = np.column_stack([np.ones(40), rng.normal(size=(40, 2))])
        y = rng.normal(size=40)
        fit = ols_fit(X, y)
        expect = np.linalg.lstsq(X, y, rcond=None)[0]
        assert np.allclose(fit.coef, expect, rtol=0, atol=1e-12)
        resid = y - X @ expect
        assert fit.rss == pytest.approx(float(resid @ resid), rel=1e-12)

    def test_rank_deficient_rejected(self):
        X = np.ones((10, 2))
        with pytest.raises(SingularDesign):
            ols_fit(X, np.arange(10.0))

    def test_too_few_rows_rejected(self):
        with pytest.raises(SingularDesign):
            ols_fit(np.eye(2), np.ones(2))


class TestCoefBias:
    def test_relative_and_absolute_kinds(self):
        out = coef_relative_bias([0.1, 1.2], [0.0, 1.0])
        assert out[0].kind is BiasKind.ABSOLUTE
        assert out[0].value == pytest.approx(0.1)
        assert out[1].kind is BiasKind.RELATIVE
        assert out[1].value == pytest.approx(0.2)


class TestNrmse:
    def make(self, truth, imp, mask):
        names = tuple(f"c{i}" for i in range(truth.shape[1]))
        return (
            DataMatrix(truth, names),
            DataMatrix(imp, names),
            MissingMask(mask),
        )

    def test_hand_value(self):
        truth = np.array([[1.0, 9.0], [3.0, 9.0]])
        imp = np.array([[2.0, 9.0], [2.0, 9.0]])
        mask = np.array([[True, False], [True, False]])
        t, i, m = self.make(truth, imp, mask)
        # Errors (1, 1) against masked truth [1, 3] with var 2.
        assert nrmse(t, i, m) == pytest.approx(np.sqrt(0.5), rel=1e-15)

    def test_mean_imputation_identity(self):
        # Imputing every masked cell with the masked-truth mean gives
        # exactly sqrt((m-1)/m).
        rng = np.random.default_rng(21)
        truth = rng.normal(size=(30, 2))
        mask = rng.random((30, 2)) < 0.4
        m = int(mask.sum())
        imp = truth.copy()
        imp[mask] = truth[mask].mean()
        t, i, mk = self.make(truth, imp, mask)
        assert abs(nrmse(t, i, mk) - np.sqrt((m - 1) / m)) < 1e-12

    def test_perfect_imputation_is_zero(self):
        rng = np.random.default_rng(22)
        truth = rng.normal(size=(10, 2))
        mask = np.zeros((10, 2), bool)
        mask[:4, 0] = True
        t, i, m = self.make(truth, truth.copy(), mask)
        assert nrmse(t, i, m) == 0.0

    def test_single_masked_cell_degenerate(self):
        truth = np.ones((3, 2))
        mask = np.zeros((3, 2), bool)
        mask[0, 0] = True
        t, i, m = self.make(truth, truth.copy(), mask)
        with pytest.raises(DegenerateNrmse):
            nrmse(t, i, m)

    def test_constant_masked_truth_degenerate(self):
        truth = np.ones((4, 2))
        truth[:, 1] = np.arange(4.0)
        mask = np.zeros((4, 2), bool)
        mask[:, 0] = True
        t, i, m = self.make(truth, truth.copy(), mask)
        with pytest.raises(DegenerateNrmse):
            nrmse(t, i, m)


class TestPearson:
    def test_matches_corrcoef(self):
        rng = np.random.default_rng(17)
        a = rng.normal(size=50)
        b = 0.4 * a + rng.normal(size=50)
        assert pearson(a, b) == pytest.approx(np.corrcoef(a, b)[0, 1], rel=1e-12)

    def test_collinear_stays_in_range(self):
        a = np.arange(5.0)
        up = pearson(a, 2.0 * a + 1.0)
        down = pearson(a, -a)
        assert up == pytest.approx(1.0, abs=1e-14) and up <= 1.0
        assert down == pytest.approx(-1.0, abs=1e-14) and down >= -1.0

    def test_constant_vector_degenerate(self):
        with pytest.raises(DegenerateCorrelation):
            pearson(np.ones(5), np.arange(5.0))


def make_record(**overrides):
    base = dict(
        replicate=0,
        scenario="strong",
        pattern="two_cells",
        strategy="sequential",
        iterations=3,
        stopped_by="difference_increased",
        rel_bias_mean_x1=-0.1,
        rel_bias_mean_x2=-0.2,
        rel_bias_sd_x1=-0.15,
        rel_bias_sd_x2=-0.16,
        coef_bias_intercept=0.05,
        coef_bias_intercept_kind="relative",
        coef_bias_x1=0.01,
        coef_bias_x2=0.02,
        nrmse_true=0.8,
        nrmse_oob=0.7,
        corr_x1x2=0.6,
        elapsed_ms=12.5,
    )
    base.update(overrides)
    return MetricsRecord(**base)


class TestMetricsRecord:
    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInput):
            make_record(nrmse_oob=float("nan"))

    def test_csv_row_round_trips_floats(self):
        rec = make_record(corr_x1x2=1 / 3)
        header = metrics_header()
        row = metrics_csv_row(rec)
        assert len(row) == len(header)
        assert "elapsed_ms" not in header
        got = dict(zip(header, row))
        assert float(got["corr_x1x2"]) == rec.corr_x1x2
        assert got["iterations"] == "3"

    def test_timing_column_is_opt_in(self):
        rec = make_record()
        assert metrics_header(include_timing=True)[-1] == "elapsed_ms"
        assert metrics_csv_row(rec, include_timing=True)[-1] == repr(12.5)
