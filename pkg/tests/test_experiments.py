import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedaudit import experiments as ex
from feedaudit import families as fam
from feedaudit.stats import audit_threshold

GMV = fam.make_family("gaussian-mean-var")


def se(p, n):
    return math.sqrt(max(p * (1 - p), 1e-12) / n)


# -- revenue ---------------------------------------------------------------------


def test_revenue_examples():
    fn = ex.RevenueFunction()
    assert ex.revenue(fn, 0.0) == 1.0
    assert ex.revenue(fn, 0.75) == pytest.approx(2.0)
    half = ex.revenue(fn, 0.375)
    assert ex.revenue(fn, 0.0) < half < ex.revenue(fn, 0.75)
    assert fn(0.375) == half
    with pytest.raises(ValueError):
        ex.revenue(fn, -0.1)
    with pytest.raises(ValueError):
        ex.RevenueFunction(peak_distance=0.0)


@settings(max_examples=100, deadline=None)
@given(base=st.floats(-5, 5), gain=st.floats(0.1, 5), peak=st.floats(0.1, 10), u=st.floats(0.01, 1.99))
def test_revenue_concave_up_to_twice_peak(base, gain, peak, u):
    fn = ex.RevenueFunction(base, gain, peak)
    d, h = u * peak, 1e-3 * peak
    second = fn(d + h) - 2 * fn(d) + fn(d - h)
    assert second < 0
    assert fn(d) <= fn(peak) + 1e-12


# -- heatmap ------------------------------------------------------------------------


def test_heatmap_shape_and_rates():
    grid = ex.run_heatmap(mu_values=[-0.5, 0.0, 0.5], sigma2_values=[0.8, 1.0], trials=200, seed=1)
    assert grid.failure_rate.shape == (2, 3)
    assert np.array_equal(grid.failure_rate, grid.failures / 200)
    rows = list(grid.rows())
    assert len(rows) == 6
    assert rows[0]["sigma2"] == 0.8 and rows[0]["mu"] == -0.5


def test_heatmap_independent_of_workers():
    kw = dict(mu_values=[0.0, 0.3, 1.0], sigma2_values=[0.6, 1.4], trials=300, seed=5)
    a = ex.run_heatmap(jobs=1, **kw)
    b = ex.run_heatmap(jobs=3, **kw)
    assert np.array_equal(a.failures, b.failures)


@pytest.fixture(scope="module")
def paper_grid():
    return ex.run_heatmap(seed=11)


def test_heatmap_default_axes(paper_grid):
    assert len(paper_grid.mu_values) == 31 and len(paper_grid.sigma2_values) == 19
    assert paper_grid.mu_values[0] == -1.5 and paper_grid.mu_values[-1] == 1.5
    assert paper_grid.sigma2_values[0] == 0.4 and paper_grid.sigma2_values[-1] == 2.2


def test_heatmap_mirror_symmetry_in_mu(paper_grid):
    g = paper_grid
    bad = 0
    for s2 in g.sigma2_values:
        for mu in g.mu_values:
            if mu <= 0:
                continue
            a, b = g.rate(mu, s2), g.rate(-mu, s2)
            p = 0.5 * (a + b)
            bad += abs(a - b) > 2 * math.sqrt(2) * se(p, g.trials)
    # 2x standard error of the difference is a 95% band; allow the expected 5% excursions
    assert bad <= 0.05 * 19 * 15 + 3


def test_heatmap_sigma_asymmetry(paper_grid):
    g = paper_grid
    for delta in (0.2,):
        up = np.mean([g.rate(m, 1.0 + delta) for m in (-0.5, -0.3, 0.3, 0.5)])
        down = np.mean([g.rate(m, 1.0 - delta) for m in (-0.5, -0.3, 0.3, 0.5)])
        assert up <= down


def test_heatmap_baseline_cell_oracle(paper_grid):
    # independent re-implementation with scipy (2e5 trials) gives 0.0798
    assert abs(paper_grid.rate(0.0, 1.0) - 0.0798) <= 4 * se(0.08, 1000)


# -- classification ----------------------------------------------------------------


def test_classification(paper_grid):
    cls = ex.classify_distributions(paper_grid, 0.8)
    assert cls.contains("passing", 0.0, 1.0)
    assert not cls.contains("failing", 0.0, 1.0)
    for c in cls.passing:
        assert c["pass_rate"] > 0.8
    rate = paper_grid.failure_rate
    for i, s2 in enumerate(paper_grid.sigma2_values):
        for j, mu in enumerate(paper_grid.mu_values):
            if 0.2 <= 1 - rate[i, j] <= 0.8:
                assert not cls.contains("passing", mu, s2) and not cls.contains("failing", mu, s2)
    assert set(cls.curves) == {"x", "baseline", "passing", "failing"}
    assert len(cls.curves["passing"]) == 3


def test_far_cell_is_failing():
    grid = ex.run_heatmap(mu_values=[3.0], sigma2_values=[1.0], trials=1000, seed=2)
    assert ex.classify_distributions(grid).contains("failing", 3.0, 1.0)


# -- cost of auditing -------------------------------------------------------------

SMALL_MU = [round(0.1 * k, 10) for k in range(0, 11)]
SMALL_S2 = [0.6, 0.8, 1.0, 1.2, 1.4, 1.8]


def test_cost_zero_when_peak_at_baseline():
    def peaked_at_zero(d):
        return 1.0 - d * d

    res = ex.cost_of_auditing(peaked_at_zero, mu_values=SMALL_MU, sigma2_values=SMALL_S2, seed=3)
    assert res.cost == 0.0
    assert res.constrained_argmax[0] == 0.0


def test_cost_invariants():
    res = ex.cost_of_auditing(ex.RevenueFunction(), mu_values=SMALL_MU, sigma2_values=SMALL_S2, seed=4)
    assert res.cost >= 0
    assert res.unconstrained_max == pytest.approx(max(ex.revenue(ex.RevenueFunction(), SMALL_MU)))
    i = SMALL_S2.index(res.constrained_argmax[1])
    j = SMALL_MU.index(res.constrained_argmax[0])
    assert 1 - res.grid.failure_rate[i, j] >= 0.8


def test_cost_diversity_incentive():
    res = ex.cost_of_auditing(ex.RevenueFunction(), seed=0)
    # the best audited policy does not shrink the variance below the baseline's
    assert res.constrained_argmax[1] >= 1.0
    assert not res.infeasible


@pytest.mark.xfail(strict=True, reason=(
    "with R peaking at d*=0.75 the feasible cells reach |mu|=0.3 only, recovering about 86% of the peak"
))
def test_cost_recovers_95_percent_of_peak():
    res = ex.cost_of_auditing(ex.RevenueFunction(), seed=0)
    assert res.constrained_max >= 0.95 * res.unconstrained_max


def test_cost_binds_far_peak():
    mu = [round(0.5 * k, 10) for k in range(0, 11)]
    res = ex.cost_of_auditing(ex.RevenueFunction(peak_distance=5.0), mu_values=mu, sigma2_values=SMALL_S2, seed=5)
    assert res.cost > 0


def test_cost_monotone_in_alpha():
    costs = [
        ex.cost_of_auditing(ex.RevenueFunction(), alpha=a, mu_values=SMALL_MU, sigma2_values=SMALL_S2,
                            trials=500, seed=6).cost
        for a in (0.001, 0.01, 0.05, 0.2)
    ]
    assert costs == sorted(costs)


def test_cost_infeasible_and_grid_checks():
    res = ex.cost_of_auditing(ex.RevenueFunction(), mu_values=[4.0, 5.0], sigma2_values=[0.5], seed=7,
                              trials=200)
    assert res.infeasible
    assert res.cost == res.unconstrained_max
    with pytest.raises(ValueError):
        ex.cost_of_auditing(ex.RevenueFunction(), mu_values=[0.0, 0.5], sigma2_values=[1.0])


# -- FPR ---------------------------------------------------------------------------


def test_fpr_requires_interior_and_enough_trials():
    with pytest.raises(ValueError):
        ex.run_fpr_experiment(GMV, (0.0, 1.0), [30], 0.01, 999)
    with pytest.raises(ValueError):
        ex.run_fpr_experiment(GMV, (10.0, 1.0), [30], 0.01, 1000)


def test_fpr_table_bounds():
    trials = 10_000
    rows = ex.run_fpr_experiment(GMV, (0.0, 1.0), [300, 1000], 0.01, trials, seed=8)
    slack = 0.01 + 3 * math.sqrt(0.01 * 0.99 / trials)
    for r in rows:
        assert r.fpr <= 0.01 + slack
        assert r.ci_low <= r.fpr <= r.ci_high


def test_fpr_large_alpha_sanity():
    (row,) = ex.run_fpr_experiment(GMV, (0.0, 1.0), [1000], 0.5, 2000, seed=9)
    assert row.fpr <= 0.6


def test_fpr_independent_of_workers():
    a = ex.run_fpr_experiment(GMV, (0.2, 1.5), [30, 60], 0.05, 1000, seed=1, jobs=1)
    b = ex.run_fpr_experiment(GMV, (0.2, 1.5), [30, 60], 0.05, 1000, seed=1, jobs=2)
    assert [r.failures for r in a] == [r.failures for r in b]


def test_fpr_other_families():
    for family, theta in [(fam.make_family("bernoulli"), (0.4,)), (fam.make_family("categorical-3"), (0.3, 0.3))]:
        rows = ex.run_fpr_experiment(family, theta, [1000], 0.01, 2000, seed=2)
        assert rows[0].fpr <= 0.01 + 0.01 + 3 * math.sqrt(0.01 * 0.99 / 2000)


# -- zero-cost construction ---------------------------------------------------------


def test_variance_shift_shrinks_the_gap():
    tau = audit_threshold(2, 30, 0.01).tau
    q = ex.shifted_quadratic(GMV, (0.0, 1.0), (1.0, 0.0), (0.0, 1.0), 3.0)
    assert q == pytest.approx(0.25)
    assert q < tau


def test_zero_cost_demonstration():
    demo = ex.proposition2_construction(seed=1)
    assert demo.status == "ok"
    assert demo.omega == [1]
    assert demo.direction == [0.0, 1.0]
    assert max(demo.quadratic_at_shift) < demo.beta
    assert demo.pass_rate >= 0.8
    assert demo.measured_cost <= 0.01 * 1.0
    assert demo.constrained_revenue == pytest.approx(demo.unconstrained_revenue)
    assert any("1 < |omega| < r" in n for n in demo.notes)


def test_zero_cost_preconditions():
    assert ex.proposition2_construction(omega=()).status == "precondition-violated"
    assert ex.proposition2_construction(omega=(0, 1)).status == "precondition-violated"


def test_zero_cost_box_binding():
    small = fam.make_family("gaussian-mean-var", domain=[[-10, 10], [0.01, 1.5]])
    demo = ex.proposition2_construction(family=small)
    assert demo.status == "box-binding"
    assert "domain" in demo.binding_constraint
    assert demo.measured_cost > 0
