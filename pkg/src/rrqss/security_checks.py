"""Numerical check that Charlie's two measurements announce identically.

Single-photon states live on 2L modes: Bob's pulses 1..L occupy basis
indices 0..L-1 and Alice's pulses 1..L occupy L..2L-1. Index pairs are
written ``(j_A, i_B)``, 1-based, with ``j_A - i_B = (-1)**b * r``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Tuple

import numpy as np

__all__ = [
    "SinglePhotonState",
    "AnnouncementDistribution",
    "interference_povm",
    "location_povm",
    "location_components",
    "announcement_distribution",
    "random_pure_state",
    "random_mixed_state",
    "equivalence_report",
]

TOL = 1e-12

Pair = Tuple[int, int]


def bob(k: int, L: int) -> int:
    return k - 1


def alice(k: int, L: int) -> int:
    return L + k - 1


def _partner(k: int, r: int, b: int) -> int:
    return k + (-1) ** b * r


def _check_rb(L: int, r: int, b: int) -> None:
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    if not 1 <= r <= L - 1:
        raise ValueError(f"r must be in 1..{L - 1}, got {r}")
    if b not in (0, 1):
        raise ValueError(f"b must be 0 or 1, got {b}")


@dataclass(frozen=True)
class SinglePhotonState:
    """Density operator on the 2L-mode single-photon subspace."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError("state must be a square matrix of even dimension")
        if np.max(np.abs(m - m.conj().T)) > TOL:
            raise ValueError("state is not Hermitian")
        if abs(np.trace(m).real - 1.0) > TOL:
            raise ValueError("state does not have unit trace")
        if np.linalg.eigvalsh(m).min() < -TOL:
            raise ValueError("state is not positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def L(self) -> int:
        return self.dim // 2

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))

    @classmethod
    def basis(cls, mode: str, k: int, L: int) -> "SinglePhotonState":
        idx = bob(k, L) if mode == "B" else alice(k, L)
        m = np.zeros((2 * L, 2 * L), dtype=complex)
        m[idx, idx] = 1.0
        return cls(m)

    @classmethod
    def maximally_mixed(cls, L: int) -> "SinglePhotonState":
        return cls(np.eye(2 * L, dtype=complex) / (2 * L))


@dataclass
class AnnouncementDistribution:
    entries: Dict[Pair, float] = field(default_factory=dict)
    no_detection: float = 0.0

    @property
    def total(self) -> float:
        return sum(self.entries.values()) + self.no_detection

    def max_deviation(self, other: "AnnouncementDistribution") -> float:
        keys = set(self.entries) | set(other.entries)
        devs = [abs(self.entries.get(k, 0.0) - other.entries.get(k, 0.0)) for k in keys]
        devs.append(abs(self.no_detection - other.no_detection))
        return max(devs)


def interference_povm(L: int, r: int, b: int) -> Dict[Tuple[int, int], np.ndarray]:
    """Rank-1 projectors keyed by ``(k, s)``, ``k`` Bob's pulse index.

    Each projects onto ``(|k>_B + (-1)**s |k + (-1)**b r>_A) / sqrt(2)``;
    only ``k`` with an in-range partner are emitted.
    """
    _check_rb(L, r, b)
    ops = {}
    for k in range(1, L + 1):
        m = _partner(k, r, b)
        if not 1 <= m <= L:
            continue
        for s in (0, 1):
            v = np.zeros(2 * L, dtype=complex)
            v[bob(k, L)] = 1.0
            v[alice(m, L)] = (-1) ** s
            # |u><u| / 2 with unnormalized u keeps basis-state probabilities exact
            ops[(k, s)] = 0.5 * np.outer(v, v.conj())
    return ops


def location_components(L: int) -> Dict[Tuple[str, int], np.ndarray]:
    """Half-weight mode projectors ``P(|k>_X)/2`` keyed by ``(X, k)``."""
    out = {}
    for k in range(1, L + 1):
        for mode, idx in (("B", bob(k, L)), ("A", alice(k, L))):
            m = np.zeros((2 * L, 2 * L), dtype=complex)
            m[idx, idx] = 0.5
            out[(mode, k)] = m
    return out


def location_povm(L: int) -> Dict[int, np.ndarray]:
    """Operators ``(P(|k>_B) + P(|k>_A)) / 2`` for k = 1..L."""
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    comps = location_components(L)
    return {k: comps[("B", k)] + comps[("A", k)] for k in range(1, L + 1)}


def _prob(rho: np.ndarray, op: np.ndarray) -> float:
    return float(np.real(np.einsum("ij,ji->", rho, op)))


def announcement_distribution(state: SinglePhotonState, kind: str, r: int, b: int
                              ) -> AnnouncementDistribution:
    """Probability of each announced ``(j_A, i_B)`` pair under one measurement.

    ``kind="interference"`` sums both detector outcomes of each projector,
    weighted by the 1/2 filter. ``kind="location"`` resolves the clicked mode
    and completes the pair with ``(r, b)``: a Bob click at ``k`` announces
    ``(k + (-1)**b r, k)``, an Alice click at ``k`` announces
    ``(k, k - (-1)**b r)``. Completions outside 1..L fall into
    ``no_detection``.
    """
    L = state.L
    _check_rb(L, r, b)
    rho = state.matrix
    entries: Dict[Pair, float] = {}
    if kind == "interference":
        for (k, s), op in interference_povm(L, r, b).items():
            pair = (_partner(k, r, b), k)
            entries[pair] = entries.get(pair, 0.0) + _prob(rho, op) / 2.0
    elif kind == "location":
        for (mode, k), op in location_components(L).items():
            if mode == "B":
                pair = (_partner(k, r, b), k)
            else:
                pair = (k, k - (-1) ** b * r)
            if not all(1 <= x <= L for x in pair):
                continue
            entries[pair] = entries.get(pair, 0.0) + _prob(rho, op)
    else:
        raise ValueError(f"unknown measurement kind {kind!r}")
    return AnnouncementDistribution(entries, 1.0 - sum(entries.values()))


def random_pure_state(L: int, rng: np.random.Generator) -> SinglePhotonState:
    """Normalized complex-Gaussian vector."""
    v = rng.normal(size=2 * L) + 1j * rng.normal(size=2 * L)
    v /= np.linalg.norm(v)
    return SinglePhotonState(np.outer(v, v.conj()))


def random_mixed_state(L: int, rng: np.random.Generator, rank: int = None) -> SinglePhotonState:
    """``G G^dagger / Tr`` for a complex-Gaussian ``2L x rank`` factor ``G``."""
    rank = rank or 2 * L
    g = rng.normal(size=(2 * L, rank)) + 1j * rng.normal(size=(2 * L, rank))
    m = g @ g.conj().T
    m = 0.5 * (m + m.conj().T)
    return SinglePhotonState(m / np.trace(m).real)


def equivalence_report(L: int, trials: int, seed: int = 0, kind: str = "mixed",
                       tol: float = 1e-10) -> dict:
    """Compare both measurements on random states for every ``(r, b)``.

    Returns a JSON-ready dict with the overall maximum entrywise deviation,
    a per-``(r, b)`` breakdown and ``passed`` (deviation <= ``tol``).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    make = {"mixed": random_mixed_state, "pure": random_pure_state}[kind]
    per_rb = {(r, b): 0.0 for r, b in product(range(1, L), (0, 1))}
    for _ in range(trials):
        state = make(L, rng)
        for r, b in per_rb:
            dev = announcement_distribution(state, "interference", r, b).max_deviation(
                announcement_distribution(state, "location", r, b))
            per_rb[(r, b)] = max(per_rb[(r, b)], dev)
    worst = max(per_rb.values())
    breakdown: List[dict] = [
        {"r": r, "b": b, "max_deviation": d} for (r, b), d in sorted(per_rb.items())
    ]
    return {
        "L": L, "trials": trials, "seed": seed, "state_kind": kind,
        "max_deviation": worst, "tolerance": tol, "passed": worst <= tol,
        "per_rb": breakdown,
    }
