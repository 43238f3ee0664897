import math

import numpy as np
import pytest

from rrqss.keyrate import FiniteSizeParams, ProtocolParams, keyrate_inside
from rrqss.model import TABLE1, Geometry, plob_bound
from rrqss.optimizer import SearchSpace, golden_section_max, optimize, select_best


def test_golden_section_finds_parabola_peak():
    x, fx, calls = golden_section_max(lambda t: -(t - 1.3) ** 2, 0.0, 4.0, tol=1e-9)
    assert x == pytest.approx(1.3, abs=1e-6)
    assert calls < 100


def test_single_point_space(table1):
    space = SearchSpace(mu_min=2.0, mu_max=2.0, mu_points=1, L_values=(256,), nu_th_values=(12,))
    res = optimize(table1, Geometry(100), space, "inside")
    assert res.best == ProtocolParams(2.0, 256, 12)
    assert res.breakdown == keyrate_inside(table1, ProtocolParams(2.0, 256, 12), Geometry(100))


def test_no_positive_rate_beyond_cutoff(table1):
    res = optimize(table1, Geometry(900), objective="inside")
    assert not res.feasible and res.rate == 0.0
    assert res.best is None and np.all(res.grid == 0)


def test_result_dominates_grid(table1):
    res = optimize(table1, Geometry(250), objective="outside")
    assert res.breakdown.R >= res.grid.max()
    assert res.breakdown.R >= res.coarse_rate


def test_beats_plob_at_400km(table1):
    g = Geometry(400)
    assert optimize(table1, g, objective="inside").rate > plob_bound(table1, g)


def test_tie_break_prefers_small_mu_then_L_then_nu():
    mus = [0.1, 0.2]
    Ls = [16, 8]
    nus = [3, 1]
    grid = np.zeros((2, 2, 2))
    grid[:, :, 1] = 5.0  # best rate at the larger mu everywhere
    assert select_best(grid, mus, Ls, nus) == (1, 1, 1)  # L=8, nu=1
    grid[0, 0, 0] = 5.0  # same rate at smaller mu wins
    assert select_best(grid, mus, Ls, nus) == (0, 0, 0)
    grid[0, 0, 0] = 6.0
    assert select_best(grid, mus, Ls, nus) == (0, 0, 0)


def test_tie_break_among_L_then_nu():
    grid = np.ones((3, 2, 1))
    assert select_best(grid, [1.0], [64, 32, 128], [5, 2]) == (1, 1, 0)


def test_refinement_never_worse_than_grid(table1):
    for D in (50, 200, 350, 550):
        res = optimize(table1, Geometry(D), objective="inside")
        assert res.rate >= res.coarse_rate


@pytest.mark.parametrize("D", [100, 250, 400, 500, 600])
def test_grid_convergence(table1, D):
    base = SearchSpace()
    a = optimize(table1, Geometry(D), base, "inside").rate
    b = optimize(table1, Geometry(D), base.refined(), "inside").rate
    assert abs(math.log10(b) - math.log10(a)) < 0.02 * abs(math.log10(a))


def test_deterministic(table1):
    a = optimize(table1, Geometry(321), objective="inside_finite", fin=FiniteSizeParams(1e4, 100))
    b = optimize(table1, Geometry(321), objective="inside_finite", fin=FiniteSizeParams(1e4, 100))
    assert a.best == b.best and a.breakdown == b.breakdown
    assert np.array_equal(a.grid, b.grid)


def test_finite_params_required_iff_finite_objective(table1):
    with pytest.raises(ValueError):
        optimize(table1, Geometry(10), objective="inside_finite")
    with pytest.raises(ValueError):
        optimize(table1, Geometry(10), objective="inside", fin=FiniteSizeParams(1e4))
    with pytest.raises(ValueError):
        optimize(table1, Geometry(10), objective="nope")


@pytest.mark.parametrize("kwargs", [dict(mu_min=0), dict(mu_min=2, mu_max=1), dict(L_values=()),
                                    dict(L_values=(1, 4)), dict(nu_th_values=(-1,)),
                                    dict(mu_points=1)])
def test_search_space_validation(kwargs):
    with pytest.raises(ValueError):
        SearchSpace(**kwargs)
