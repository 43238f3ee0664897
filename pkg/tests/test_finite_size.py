from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rrqss.keyrate import (
    FiniteSizeParams,
    ProtocolParams,
    asymptotic_phase_entropy,
    binomial_tail,
    binomial_tail_quantile,
    exact_tail_bounds,
    finite_size_phase_entropy,
    finite_size_shortcut,
    keyrate_inside,
    keyrate_inside_finite,
    tail_bound_comparison,
)
from rrqss.model import Geometry


def tail_oracle(a, n, p):
    p = Fraction(p)
    return float(sum(comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(a + 1, n + 1)))


def test_binomial_tail_examples():
    assert binomial_tail(7, 7, 0.4) == 0.0
    assert binomial_tail(0, 1, 0.3) == pytest.approx(0.3, abs=1e-15)
    # direct summation oracle: 105230779483 / 2**38
    assert binomial_tail(5, 20, 0.25) == pytest.approx(0.38282734561289544, rel=1e-12)


@pytest.mark.parametrize("a,n,p", [(0, 10, 0.5), (3, 40, 0.01), (30, 60, 0.3), (99, 100, 0.9),
                                   (10, 500, 0.05)])
def test_binomial_tail_matches_summation(a, n, p):
    assert binomial_tail(a, n, p) == pytest.approx(tail_oracle(a, n, p), rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("bad", [(-1, 10, 0.5), (11, 10, 0.5), (2, 10, 1.5), (2.5, 10, 0.5)])
def test_binomial_tail_domain(bad):
    with pytest.raises(ValueError):
        binomial_tail(*bad)


def test_binomial_quantile_is_minimal():
    n, p, eps = 200, 0.1, 1e-6
    a = binomial_tail_quantile(n, p, eps)
    assert binomial_tail(a, n, p) <= eps < binomial_tail(a - 1, n, p)


def test_finite_entropy_only_sn_survives():
    assert finite_size_phase_entropy(0.0, 0.0, 1e4, 100) == pytest.approx(0.01, abs=1e-15)


@pytest.mark.parametrize("p1,p2", [(0.0, 0.05), (0.02, 0.08), (0.1, 0.01)])
def test_finite_entropy_large_n_limit(p1, p2):
    asy = asymptotic_phase_entropy(p1, p2)
    assert finite_size_phase_entropy(p1, p2, 1e16, 100) == pytest.approx(asy, rel=1e-5)
    assert finite_size_phase_entropy(p1, p2, 1e4, 100) > asy


def test_shortcut_error_shrinks_with_block_length():
    errs = [abs(finite_size_shortcut(0.05, 0.08, N, 100) / finite_size_phase_entropy(0.05, 0.08, N, 100) - 1)
            for N in (1e6, 1e8, 1e10)]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("D", [100, 300, 500])
def test_finite_rate_converges_to_separate_tagging(table1, D):
    proto = ProtocolParams(12.0, 512, 30)
    g = Geometry(D)
    asy = keyrate_inside(table1, proto, g, tagging="separate")
    fin = keyrate_inside_finite(table1, proto, g, FiniteSizeParams(1e18, 100))
    assert fin.R_raw == pytest.approx(asy.R_raw, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 30), st.sampled_from([16, 128, 1024]), st.integers(0, 32),
       st.floats(0, 650), st.floats(1e2, 1e12), st.integers(10, 200))
def test_finite_rate_never_exceeds_asymptotic(mu, L, nu, D, N, s):
    from rrqss.model import TABLE1
    proto = ProtocolParams(mu, L, nu)
    g = Geometry(D)
    asy = keyrate_inside(TABLE1, proto, g, tagging="separate")
    fin = keyrate_inside_finite(TABLE1, proto, g, FiniteSizeParams(N, s))
    assert fin.R <= asy.R
    assert 0 <= fin.r1 <= 1 and 0 <= fin.r2 <= 1


def test_exact_mode_bounds(table1):
    proto = ProtocolParams(12.0, 512, 30)
    g = Geometry(300)
    fin = FiniteSizeParams(1e4, 100)
    gauss = keyrate_inside_finite(table1, proto, g, fin)
    exact = keyrate_inside_finite(table1, proto, g, FiniteSizeParams(1e4, 100, exact=True))
    asy = keyrate_inside(table1, proto, g, tagging="separate")
    assert exact.r1 >= 0 and exact.r2 >= 0
    assert exact.R <= asy.R
    assert gauss.R > 0 and exact.R > 0


def test_exact_tail_bounds_zero_tagging():
    r1, r2 = exact_tail_bounds(0.0, 1e-3, 0.05, 1e4, 100)
    assert r1 == 0
    assert r2 > 0.05


@pytest.mark.parametrize("n", [1000, 10000])
def test_tail_bound_comparison_exact_side(n):
    exact, gauss = tail_bound_comparison(n, 0.1, 70)
    a = round(exact * n)
    assert binomial_tail(a, n, 0.1) <= 2.0**-70 < binomial_tail(a - 1, n, 0.1)
    assert gauss > 0.1
