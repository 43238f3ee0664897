"""Grid search plus golden-section refinement of the protocol knobs.

The coarse search scores every (L, nu_th, mu) triple of the grid in one
vectorized call per train length. The best cell's mu is then refined with a
golden-section search in log(mu) between its two grid neighbours. The full
coarse grid of rates is kept on the result for auditing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .keyrate import (
    FiniteSizeParams,
    OBJECTIVES,
    ProtocolParams,
    RateBreakdown,
    _breakdown,
    evaluate,
)
from .model import Geometry, SystemParams, arm_transmittance

__all__ = ["SearchSpace", "OptimizationResult", "golden_section_max", "select_best", "optimize"]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchSpace:
    """Candidate values for the optimizer.

    ``mu`` is searched on a log-spaced grid of ``mu_points`` values between
    ``mu_min`` and ``mu_max``.
    """

    mu_min: float = 1e-3
    mu_max: float = 1e2
    mu_points: int = 61
    L_values: tuple = tuple(2 ** k for k in range(1, 13))
    nu_th_values: tuple = tuple(range(33))

    def __post_init__(self):
        object.__setattr__(self, "L_values", tuple(int(v) for v in self.L_values))
        object.__setattr__(self, "nu_th_values", tuple(int(v) for v in self.nu_th_values))
        if not 0 < self.mu_min <= self.mu_max:
            raise ValueError("need 0 < mu_min <= mu_max")
        if self.mu_points < 1 or (self.mu_points == 1 and self.mu_min != self.mu_max):
            raise ValueError("mu grid needs >= 2 points unless mu_min == mu_max")
        if not self.L_values or min(self.L_values) < 2:
            raise ValueError("L_values must be nonempty with every L >= 2")
        if not self.nu_th_values or min(self.nu_th_values) < 0:
            raise ValueError("nu_th_values must be nonempty and non-negative")

    @property
    def mu_grid(self) -> np.ndarray:
        if self.mu_points == 1:
            return np.array([self.mu_min])
        return np.logspace(math.log10(self.mu_min), math.log10(self.mu_max), self.mu_points)

    @property
    def size(self) -> int:
        return self.mu_points * len(self.L_values) * len(self.nu_th_values)

    def refined(self) -> "SearchSpace":
        """Same bounds with roughly twice the mu and L resolution."""
        Ls = set(self.L_values)
        srt = sorted(Ls)
        for a, b in zip(srt, srt[1:]):
            if b - a > 1:
                Ls.add((a + b) // 2)
        return SearchSpace(self.mu_min, self.mu_max, 2 * self.mu_points - 1,
                           tuple(sorted(Ls)), self.nu_th_values)


@dataclass
class OptimizationResult:
    """Outcome of :func:`optimize`.

    ``best`` and ``breakdown`` are ``None`` when no grid point gives a
    positive rate. ``grid`` holds the coarse-grid rates with shape
    ``(len(L_values), len(nu_th_values), mu_points)``.
    """

    objective: str
    best: Optional[ProtocolParams]
    breakdown: Optional[RateBreakdown]
    evaluations: int
    grid: np.ndarray = field(repr=False)
    coarse_rate: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.best is not None

    @property
    def rate(self) -> float:
        return self.breakdown.R if self.breakdown is not None else 0.0


def golden_section_max(fun: Callable[[float], float], a: float, b: float,
                       tol: float = 1e-6, max_iter: int = 200):
    """Maximize a unimodal ``fun`` on ``[a, b]``; returns ``(x, fun(x), calls)``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    calls = 2
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fun(d)
        calls += 1
    if fc >= fd:
        return c, fc, calls
    return d, fd, calls


def select_best(grid: np.ndarray, mus, L_values, nu_values):
    """Index ``(iL, inu, imu)`` of the grid maximum.

    Equal rates are resolved toward smaller mu, then smaller L, then smaller
    nu_th, independent of the order the candidate lists are given in.
    """
    iL, inu, imu = np.meshgrid(np.arange(len(L_values)), np.arange(len(nu_values)),
                               np.arange(len(mus)), indexing="ij")
    # lexsort: last key is primary
    order = np.lexsort((np.asarray(nu_values)[inu].ravel(), np.asarray(L_values)[iL].ravel(),
                        np.asarray(mus)[imu].ravel(), -np.asarray(grid).ravel()))
    k = order[0]
    return int(iL.ravel()[k]), int(inu.ravel()[k]), int(imu.ravel()[k])


def optimize(sys: SystemParams, geom: Geometry, space: SearchSpace = SearchSpace(),
             objective: str = "inside", fin: Optional[FiniteSizeParams] = None,
             tagging: str = "merged") -> OptimizationResult:
    """Maximize the chosen key rate over ``space`` at one distance.

    Ties are broken toward smaller mu, then smaller L, then smaller nu_th.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    if (objective == "inside_finite") != (fin is not None):
        raise ValueError("FiniteSizeParams are required for, and only for, inside_finite")

    arm_eta = arm_transmittance(sys, geom)
    mus = space.mu_grid
    nus = np.asarray(space.nu_th_values, dtype=float)
    Ls = [L for L in space.L_values if L * sys.p_d < 1]
    if not Ls:
        raise ValueError("every candidate L violates L * p_d < 1")

    grid = np.zeros((len(space.L_values), len(nus), len(mus)))
    for i, L in enumerate(space.L_values):
        if L * sys.p_d >= 1:
            continue
        vals = evaluate(sys, arm_eta, mus[None, :], L, nus[:, None], objective,
                        tagging=tagging, fin=fin)
        grid[i] = np.maximum(vals["R_raw"], 0.0)
    evaluations = len(Ls) * len(nus) * len(mus)

    bi, bn, bm = select_best(grid, mus, space.L_values, nus)
    coarse = float(grid[bi, bn, bm])
    if coarse <= 0.0:
        return OptimizationResult(objective, None, None, evaluations, grid, 0.0)

    L_best = space.L_values[bi]
    nu_best = space.nu_th_values[bn]

    def score(log_mu: float) -> float:
        v = evaluate(sys, arm_eta, math.exp(log_mu), L_best, nu_best, objective,
                     tagging=tagging, fin=fin)
        return float(v["R_raw"])

    mu_best = float(mus[bm])
    if len(mus) > 1:
        lo = math.log(mus[max(bm - 1, 0)])
        hi = math.log(mus[min(bm + 1, len(mus) - 1)])
        x, fx, calls = golden_section_max(score, lo, hi, tol=1e-7)
        evaluations += calls
        if fx > coarse:
            mu_best = math.exp(x)

    best = ProtocolParams(mu_best, L_best, nu_best)
    vals = evaluate(sys, arm_eta, best.mu, best.L, best.nu_th, objective,
                    tagging=tagging, fin=fin)
    return OptimizationResult(objective, best, _breakdown(vals), evaluations, grid, coarse)


def optimize_many(sys: SystemParams, distances: Sequence[float], **kwargs):
    """Run :func:`optimize` at each distance, in order."""
    return [optimize(sys, Geometry(float(d)), **kwargs) for d in distances]
