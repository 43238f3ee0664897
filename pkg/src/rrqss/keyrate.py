"""Analytic key rates of round-robin quantum secret sharing.

Everything here is a pure function. The private ``evaluate`` core broadcasts
over numpy arrays so the optimizer can score a whole parameter grid in one
call; the public per-point functions are thin wrappers around it, so both
paths share one implementation.

Phase-error entropies saturate: a phase-error bound of 1/2 or more already
means the adversary may know everything, so its entropy is taken as 1 rather
than folding back down the binary-entropy curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .model import Geometry, SystemParams, arm_transmittance

__all__ = [
    "ProtocolParams",
    "FiniteSizeParams",
    "RateBreakdown",
    "OBJECTIVES",
    "binary_entropy",
    "phase_entropy",
    "train_gain",
    "train_bit_error",
    "gain",
    "bit_error_rate",
    "source_tag_probability",
    "phase_error_outside",
    "phase_error_inside",
    "keyrate_outside",
    "keyrate_inside",
    "keyrate_inside_finite",
    "binomial_tail",
    "binomial_tail_quantile",
    "gaussian_tail_bounds",
    "tail_bound_comparison",
    "exact_tail_bounds",
    "finite_size_phase_entropy",
    "asymptotic_phase_entropy",
    "finite_size_shortcut",
    "evaluate",
]

LN2 = math.log(2.0)
OBJECTIVES = ("outside", "inside", "inside_finite")
TAGGING_MODES = ("merged", "separate")


@dataclass(frozen=True)
class ProtocolParams:
    """Tunable protocol knobs: train intensity, train length, tagging threshold."""

    mu: float
    L: int
    nu_th: int

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if int(self.L) != self.L or self.L < 2:
            raise ValueError(f"L must be an integer >= 2, got {self.L}")
        if int(self.nu_th) != self.nu_th or self.nu_th < 0:
            raise ValueError(f"nu_th must be a non-negative integer, got {self.nu_th}")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "nu_th", int(self.nu_th))


@dataclass(frozen=True)
class FiniteSizeParams:
    """Finite-size settings.

    ``N`` is the number of sifted bits and ``s`` sets both failure
    probabilities to ``2**-s``. With ``exact=True`` the tagged and
    phase-error fractions come from inverting the exact binomial tail
    instead of the Gaussian approximation.
    """

    N: float
    s: float = 100
    exact: bool = False

    def __post_init__(self):
        if not self.N > 0:
            raise ValueError(f"N must be positive, got {self.N}")
        if not self.s > 0:
            raise ValueError(f"s must be positive, got {self.s}")


@dataclass(frozen=True)
class RateBreakdown:
    """Intermediate quantities of one rate evaluation.

    ``R`` is the reported (clamped) rate; ``R_raw`` keeps the sign so callers
    can tell a clamped zero from a genuinely tiny rate.
    """

    Q: float
    Q_A: float
    Q_B: float
    Q_hat: float
    e_b: float
    e_src: float
    e_p: float
    e_p_hat: float
    R_raw: float
    r1: Optional[float] = None
    r2: Optional[float] = None
    R: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "R", max(self.R_raw, 0.0))

    @property
    def clamped(self) -> bool:
        return self.R_raw <= 0.0

    def as_dict(self) -> dict:
        return {
            "Q": self.Q, "Q_A": self.Q_A, "Q_B": self.Q_B, "Q_hat": self.Q_hat,
            "e_b": self.e_b, "e_src": self.e_src, "e_p": self.e_p,
            "e_p_hat": self.e_p_hat, "r1": self.r1, "r2": self.r2,
            "R": self.R, "R_raw": self.R_raw, "clamped": self.clamped,
        }


# --------------------------------------------------------------------------
# entropy helpers


def _check_prob(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr


def _h(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xs = np.where(inside, x, 0.5)
    out = -xs * np.log2(xs) - (1 - xs) * np.log2(1 - xs)
    return np.where(inside, out, 0.0)


def binary_entropy(x):
    """Shannon entropy of a Bernoulli(x) variable, ``h(0) = h(1) = 0``.

    >>> float(binary_entropy(0.5))
    1.0
    """
    arr = _check_prob(x)
    out = _h(arr)
    return float(out) if out.ndim == 0 else out


def phase_entropy(e):
    """Entropy charged for a phase-error bound ``e``; saturates at 1 for ``e >= 1/2``."""
    e = np.clip(np.asarray(e, dtype=float), 0.0, 0.5)
    out = _h(e)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# gain, bit error, tagging


def train_gain(mu, L, p_d, arm_eta):
    """Per-train gain ``Q = (1 - (1 - L p_d) exp(-2 mu sqrt_eta)) / 2``.

    ``arm_eta`` is the per-arm efficiency. Broadcasts over arrays.
    """
    L = np.asarray(L, dtype=float)
    if np.any(L * p_d >= 1):
        raise ValueError("L * p_d >= 1 makes the no-click probability negative")
    x = 2.0 * np.asarray(mu, dtype=float) * arm_eta
    out = 0.5 * (-np.expm1(-x) + L * p_d * np.exp(-x))
    return float(out) if out.ndim == 0 else out


def train_bit_error(mu, L, p_d, e_d, arm_eta):
    """Bit error rate among effective trains. Undefined when nothing can click."""
    L = np.asarray(L, dtype=float)
    x = 2.0 * np.asarray(mu, dtype=float) * arm_eta
    click = -np.expm1(-x)
    dark = L * p_d * np.exp(-x)
    den = click + dark
    if np.any(den <= 0):
        raise ValueError("bit error rate undefined: no photon or dark-count clicks")
    out = (e_d * click + 0.5 * dark) / den
    return float(out) if out.ndim == 0 else out


def gain(sys: SystemParams, proto: ProtocolParams, geom: Geometry) -> float:
    return train_gain(proto.mu, proto.L, sys.p_d, arm_transmittance(sys, geom))


def bit_error_rate(sys: SystemParams, proto: ProtocolParams, geom: Geometry) -> float:
    return train_bit_error(proto.mu, proto.L, sys.p_d, sys.e_d, arm_transmittance(sys, geom))


def source_tag_probability(mu, nu_th):
    """Probability that a Poisson(mu) train holds more than ``nu_th`` photons."""
    mu = np.asarray(mu, dtype=float)
    nu_th = np.asarray(nu_th)
    if np.any(mu < 0) or np.any(nu_th < 0):
        raise ValueError("mu and nu_th must be non-negative")
    # pdtrc(k, m) = P(X > k), computed via the regularized gamma function, so
    # tiny tails keep full relative precision.
    out = special.pdtrc(nu_th, mu)
    return float(out) if np.ndim(out) == 0 else out


def _mix(tagged, p2):
    tagged = np.minimum(tagged, 1.0)
    return np.clip(tagged + (1.0 - tagged) * p2, 0.0, 1.0)


def phase_error_outside(Q, e_src, nu_th, L):
    """Outside-adversary phase error; both honest senders may be tagged."""
    Q = np.asarray(Q, dtype=float)
    if np.any(Q <= 0):
        raise ValueError("Q must be positive")
    out = _mix(2.0 * np.asarray(e_src) / Q, np.asarray(nu_th) / (np.asarray(L) - 1.0))
    return float(out) if out.ndim == 0 else out


def phase_error_inside(Q_hat, e_src, nu_th, L):
    """Inside-adversary phase error; only the honest sender's tagging counts."""
    Q_hat = np.asarray(Q_hat, dtype=float)
    if np.any(Q_hat <= 0):
        raise ValueError("Q_hat must be positive")
    out = _mix(np.asarray(e_src) / Q_hat, np.asarray(nu_th) / (np.asarray(L) - 1.0))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# finite size


def binomial_tail(a, n, p):
    """P(X > a) for X ~ Binomial(n, p)."""
    if int(a) != a or int(n) != n:
        raise ValueError("a and n must be integers")
    a, n = int(a), int(n)
    if n < 0 or a < 0 or a > n:
        raise ValueError(f"need 0 <= a <= n, got a={a}, n={n}")
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if a >= n or p == 0:
        return 0.0
    if p == 1:
        return 1.0
    # P(X >= a+1) = I_p(a+1, n-a)
    return float(special.betainc(a + 1, n - a, p))


def binomial_tail_quantile(n, p, eps):
    """Smallest integer ``a`` in [0, n] with ``binomial_tail(a, n, p) <= eps``."""
    n = int(n)
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) // 2
        if binomial_tail(mid, n, p) <= eps:
            hi = mid
        else:
            lo = mid + 1
    return lo


def gaussian_tail_bounds(p1, p2, N, s):
    """Tagged and phase-error fraction bounds from the Gaussian tail approximation."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    k = 2.0 * LN2 * s / N
    r1 = np.clip(p1 + np.sqrt(k * np.clip(p1, 0, None)), 0.0, 1.0)
    r2 = np.clip(p2 + np.sqrt(k * np.clip(p2 * (1.0 - p2), 0, None)), 0.0, 1.0)
    return r1, r2


def exact_tail_bounds(e_src, Q_hat, p2, N, s):
    """Tagged and phase-error fractions from exact binomial-tail inversion.

    The tagged count is drawn from ``N / Q_hat`` transmitted trains with
    tagging probability ``e_src``; the phase errors from the ``N(1 - r1)``
    remaining bits with rate ``p2``.
    """
    eps = 2.0 ** (-s)
    p2 = min(max(p2, 0.0), 1.0)
    if e_src <= 0:
        r1 = 0.0
    else:
        n_round = max(int(math.ceil(N / Q_hat)), 1)
        r1 = min(binomial_tail_quantile(n_round, min(e_src, 1.0), eps) / N, 1.0)
    n_rest = int(round(N * (1.0 - r1)))
    if n_rest <= 0:
        return r1, 1.0
    r2 = binomial_tail_quantile(n_rest, p2, eps) / n_rest
    return r1, r2


def tail_bound_comparison(n, p, s):
    """Exact and Gaussian bounds on the fraction of ``n`` Bernoulli(p) successes.

    Returns ``(exact, gaussian)``: ``exact`` is the smallest ``a/n`` with
    ``binomial_tail(a, n, p) <= 2**-s``, ``gaussian`` the approximation
    ``p + sqrt(2 ln2 p (1-p) s/n)``. The approximation is conservative when
    ``gaussian >= exact``.
    """
    exact = binomial_tail_quantile(n, p, 2.0 ** (-s)) / n
    gauss = p + math.sqrt(2.0 * LN2 * p * (1.0 - p) * s / n)
    return exact, gauss


def finite_size_phase_entropy(p1, p2, N, s):
    """Phase entropy ``r1 + (1 - r1) h(r2) + s/N`` with Gaussian ``r1``, ``r2``."""
    _check_prob(p1, "p1")
    _check_prob(p2, "p2")
    if not N > 0 or not s > 0:
        raise ValueError("N and s must be positive")
    r1, r2 = gaussian_tail_bounds(p1, p2, N, s)
    out = r1 + (1.0 - r1) * phase_entropy(r2) + s / N
    return float(out) if np.ndim(out) == 0 else out


def asymptotic_phase_entropy(p1, p2):
    """Large-N limit of :func:`finite_size_phase_entropy`."""
    p1 = np.minimum(np.asarray(p1, dtype=float), 1.0)
    out = p1 + (1.0 - p1) * phase_entropy(p2)
    return float(out) if np.ndim(out) == 0 else out


def finite_size_shortcut(p1, p2, N, s):
    """One-line estimate ``h_asy * (1 + 1.98 sqrt(s/N))``."""
    return asymptotic_phase_entropy(p1, p2) * (1.0 + 1.98 * math.sqrt(s / N))


# --------------------------------------------------------------------------
# rate evaluation


def evaluate(sys, arm_eta, mu, L, nu_th, objective="inside", tagging="merged", fin=None):
    """Broadcast every rate quantity over arrays of ``mu``, ``L``, ``nu_th``.

    Returns a dict of arrays keyed like :class:`RateBreakdown` fields, with
    ``R_raw`` unclamped. ``tagging`` picks how the inside rate charges tagged
    trains: ``"merged"`` folds them into one phase-error rate, ``"separate"``
    counts them as fully leaked bits and is the large-N limit of the
    finite-size rate.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    if tagging not in TAGGING_MODES:
        raise ValueError(f"unknown tagging mode {tagging!r}")
    if objective == "inside_finite" and fin is None:
        raise ValueError("inside_finite needs FiniteSizeParams")
    mu = np.asarray(mu, dtype=float)
    L = np.asarray(L, dtype=float)
    nu_th = np.asarray(nu_th, dtype=float)

    Q = np.asarray(train_gain(mu, L, sys.p_d, arm_eta))
    e_b = np.asarray(train_bit_error(mu, L, sys.p_d, sys.e_d, arm_eta))
    e_src = np.asarray(source_tag_probability(mu, nu_th))
    p2 = np.minimum(nu_th / (L - 1.0), 1.0)
    Q_hat = 0.5 * Q
    with np.errstate(divide="ignore", invalid="ignore"):
        e_p = _mix(np.where(Q > 0, 2.0 * e_src / Q, 1.0), p2)
        p1 = np.minimum(np.where(Q_hat > 0, e_src / Q_hat, 1.0), 1.0)
    e_p_hat = _mix(p1, p2)
    leak = sys.f * _h(e_b)
    r1 = r2 = None

    if objective == "outside":
        R = Q / L * (1.0 - phase_entropy(e_p) - leak)
    else:
        if objective == "inside":
            if tagging == "merged":
                H = phase_entropy(e_p_hat)
            else:
                H = asymptotic_phase_entropy(p1, p2)
        elif fin.exact:
            pairs = [
                exact_tail_bounds(es, qh, q2, fin.N, fin.s)
                for es, qh, q2 in zip(*(a.ravel() for a in np.broadcast_arrays(e_src, Q_hat, p2)))
            ]
            shape = np.broadcast(e_src, Q_hat, p2).shape
            r1 = np.array([a for a, _ in pairs]).reshape(shape)
            r2 = np.array([b for _, b in pairs]).reshape(shape)
            H = r1 + (1.0 - r1) * phase_entropy(r2) + fin.s / fin.N
        else:
            r1, r2 = gaussian_tail_bounds(p1, p2, fin.N, fin.s)
            H = r1 + (1.0 - r1) * phase_entropy(r2) + fin.s / fin.N
        R = (Q_hat * (1.0 - H) - Q * leak) / L

    return {
        "Q": Q, "Q_A": Q_hat, "Q_B": Q_hat, "Q_hat": Q_hat, "e_b": e_b,
        "e_src": e_src, "e_p": e_p, "e_p_hat": e_p_hat, "R_raw": R,
        "r1": r1, "r2": r2,
    }


def _breakdown(values: dict) -> RateBreakdown:
    def scalar(v):
        return None if v is None else float(v)

    return RateBreakdown(**{k: scalar(v) for k, v in values.items()})


def keyrate_outside(sys: SystemParams, proto: ProtocolParams, geom: Geometry) -> RateBreakdown:
    """Key rate per pulse against an outside eavesdropper."""
    return _breakdown(evaluate(sys, arm_transmittance(sys, geom), proto.mu, proto.L,
                               proto.nu_th, "outside"))


def keyrate_inside(sys: SystemParams, proto: ProtocolParams, geom: Geometry,
                   tagging: str = "merged") -> RateBreakdown:
    """Key rate per pulse when one of the two players is dishonest.

    The symmetric layout gives ``Q_A = Q_B = Q/2``, so ``Q_hat = Q/2``.
    """
    return _breakdown(evaluate(sys, arm_transmittance(sys, geom), proto.mu, proto.L,
                               proto.nu_th, "inside", tagging=tagging))


def keyrate_inside_finite(sys: SystemParams, proto: ProtocolParams, geom: Geometry,
                          fin: FiniteSizeParams) -> RateBreakdown:
    """Inside-adversary rate with the finite-size phase entropy.

    Converges to ``keyrate_inside(..., tagging="separate")`` as ``N`` grows.
    """
    return _breakdown(evaluate(sys, arm_transmittance(sys, geom), proto.mu, proto.L,
                               proto.nu_th, "inside_finite", fin=fin))
