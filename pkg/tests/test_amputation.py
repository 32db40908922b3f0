"""MAR mask generation: logistic mechanism, patterns, and reproducibility."""

import numpy as np
import pytest

from forestfill import (
    AmputationFailure,
    AmputationSpec,
    DataMatrix,
    InvalidInput,
    PatternKind,
    SeedSpec,
    ampute,
    scenario_patterns,
)
from forestfill.amputation import _logistic, _solve_shift


def make_data(seed=0, n=200, p=3):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(n, p))
    vals[:, 0] = vals[:, 0] * 3.0 + vals[:, 1]
    return DataMatrix(vals, tuple(f"c{i}" for i in range(p)))


class TestSpecValidation:
    def test_rejects_empty_patterns(self):
        with pytest.raises(InvalidInput):
            AmputationSpec(patterns=(), pattern_freq=())

    def test_rejects_weight_column_in_pattern(self):
        with pytest.raises(InvalidInput):
            AmputationSpec(patterns=(frozenset({0, 1}),), pattern_freq=(1.0,))

    def test_rejects_freq_not_summing_to_one(self):
        with pytest.raises(InvalidInput):
            AmputationSpec(patterns=(frozenset({1}),), pattern_freq=(0.9,))

    def test_rejects_freq_length_mismatch(self):
        with pytest.raises(InvalidInput):
            AmputationSpec(
                patterns=(frozenset({1}), frozenset({2})), pattern_freq=(1.0,)
            )

    def test_rejects_bad_prop(self):
        for prop in (0.0, 1.0, -0.2):
            with pytest.raises(InvalidInput):
                AmputationSpec(
                    patterns=(frozenset({1}),), pattern_freq=(1.0,), prop=prop
                )

    def test_rejects_empty_column_set(self):
        with pytest.raises(InvalidInput):
            AmputationSpec(patterns=(frozenset(),), pattern_freq=(1.0,))


class TestScenarioPatterns:
    def test_two_cells_layout(self):
        spec = scenario_patterns(PatternKind.TWO_CELLS)
        assert spec.patterns == (frozenset({1, 2}),)
        assert spec.pattern_freq == (1.0,)
        assert spec.weight_column == 0
        assert spec.prop == 0.5

    def test_one_cell_layout(self):
        spec = scenario_patterns(PatternKind.ONE_CELL)
        assert spec.patterns == (frozenset({1}), frozenset({2}))
        assert spec.pattern_freq == (0.5, 0.5)

    def test_generalizes_to_other_widths(self):
        spec = scenario_patterns(PatternKind.ONE_CELL, n_cols=5, weight_column=2)
        assert spec.patterns == tuple(frozenset({c}) for c in (0, 1, 3, 4))
        assert spec.pattern_freq == (0.25,) * 4

    def test_rejects_single_column(self):
        with pytest.raises(InvalidInput):
            scenario_patterns(PatternKind.TWO_CELLS, n_cols=1)


class TestShiftSolver:
    def test_logistic_midpoint_and_symmetry(self):
        u = np.array([0.0, 3.0, -3.0, 800.0, -800.0])
        out = _logistic(u)
        assert out[0] == 0.5
        assert out[1] == pytest.approx(1.0 - out[2], abs=1e-15)
        # Extreme arguments saturate instead of overflowing.
        assert out[3] == 1.0
        assert out[4] == pytest.approx(0.0, abs=1e-300)

    def test_shift_hits_requested_mean(self):
        rng = np.random.default_rng(3)
        z = rng.normal(size=500)
        for prop in (0.1, 0.5, 0.9):
            b = _solve_shift(z, prop)
            assert abs(_logistic(z + b).mean() - prop) < 1e-6

    def test_symmetric_scores_need_no_shift(self):
        z = np.array([-2.0, -1.0, 1.0, 2.0])
        assert abs(_solve_shift(z, 0.5)) < 1e-5


class TestAmpute:
    def test_mask_reconstructible_from_seed(self):
        # The draw order is one uniform per row for pattern assignment,
        # then one per row for the Bernoulli; with the returned shift the
        # whole mask is reproducible from the raw generator.
        data = make_data(seed=1)
        spec = scenario_patterns(PatternKind.ONE_CELL)
        seed = SeedSpec(77)
        out = ampute(data, spec, seed)

        rng = seed.generator()
        w = data.values[:, 0]
        z = (w - w.mean()) / w.std(ddof=1)
        probs = _logistic(z + out.shift)
        assigned = np.searchsorted(
            np.cumsum(spec.pattern_freq), rng.random(data.n_rows), side="right"
        )
        fired = rng.random(data.n_rows) < probs
        expect = np.zeros((data.n_rows, 3), dtype=bool)
        expect[fired & (assigned == 0), 1] = True
        expect[fired & (assigned == 1), 2] = True
        assert np.array_equal(out.mask.mask, expect)
        assert out.realized_prop == fired.mean()

    def test_same_seed_same_mask(self):
        data = make_data(seed=2)
        spec = scenario_patterns(PatternKind.TWO_CELLS)
        a = ampute(data, spec, SeedSpec(5))
        b = ampute(data, spec, SeedSpec(5))
        c = ampute(data, spec, SeedSpec(6))
        assert np.array_equal(a.mask.mask, b.mask.mask)
        assert not np.array_equal(a.mask.mask, c.mask.mask)

    def test_two_cells_rows_lose_both_columns(self):
        data = make_data(seed=4)
        out = ampute(data, scenario_patterns(PatternKind.TWO_CELLS), SeedSpec(1))
        m = out.mask.mask
        assert not m[:, 0].any()
        assert np.array_equal(m[:, 1], m[:, 2])
        assert 0.2 < m[:, 1].mean() < 0.8

    def test_one_cell_rows_lose_exactly_one(self):
        data = make_data(seed=5)
        out = ampute(data, scenario_patterns(PatternKind.ONE_CELL), SeedSpec(2))
        m = out.mask.mask
        assert not m[:, 0].any()
        per_row = m.sum(axis=1)
        assert set(np.unique(per_row)) <= {0, 1}
        assert (per_row == 1).mean() == out.realized_prop

    def test_masked_rows_have_higher_weight(self):
        # Right-tailed mechanism: high weight-column rows vanish more.
        hits = 0
        for s in range(20):
            data = make_data(seed=100 + s)
            out = ampute(data, scenario_patterns(PatternKind.TWO_CELLS), SeedSpec(s))
            rows = out.mask.mask[:, 1]
            if data.values[rows, 0].mean() > data.values[~rows, 0].mean():
                hits += 1
        assert hits >= 19

    def test_realized_prop_tracks_target(self):
        props = []
        for s in range(30):
            data = make_data(seed=200 + s, n=400)
            out = ampute(data, scenario_patterns(PatternKind.TWO_CELLS), SeedSpec(s))
            props.append(out.realized_prop)
        assert abs(np.mean(props) - 0.5) < 0.03

    def test_prop_extremes_still_solve(self):
        data = make_data(seed=6)
        for prop in (0.05, 0.95):
            spec = scenario_patterns(PatternKind.TWO_CELLS, prop=prop)
            out = ampute(data, spec, SeedSpec(3))
            assert abs(out.mask.mask[:, 1].mean() - prop) < 0.12

    def test_zero_variance_weight_fails(self):
        vals = np.ones((50, 3))
        data = DataMatrix(vals, ("a", "b", "c"))
        with pytest.raises(AmputationFailure):
            ampute(data, scenario_patterns(PatternKind.TWO_CELLS), SeedSpec(0))

    def test_out_of_range_pattern_column_rejected(self):
        data = make_data(seed=7, p=2)
        spec = AmputationSpec(patterns=(frozenset({4}),), pattern_freq=(1.0,))
        with pytest.raises(InvalidInput):
            ampute(data, spec, SeedSpec(0))

    def test_out_of_range_weight_column_rejected(self):
        data = make_data(seed=8, p=2)
        spec = AmputationSpec(
            patterns=(frozenset({0}),), pattern_freq=(1.0,), weight_column=9
        )
        with pytest.raises(InvalidInput):
            ampute(data, spec, SeedSpec(0))
