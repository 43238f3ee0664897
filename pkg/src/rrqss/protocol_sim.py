"""Monte-Carlo simulation of the protocol at the pulse-train level.

Physical model, per train:

* Alice and Bob draw uniform L-bit phase strings; Charlie draws the delay
  magnitude ``r`` in 1..L-1 and sign bit ``b``.
* The number of interfering photons reaching the detectors is
  Poisson(2 mu sqrt_eta). Each photon, and each per-slot dark click
  (probability ``p_d``), passes Charlie's efficiency-1/2 filter
  independently. Without the filter, exactly-one-click trains occur about
  twice as often as the analytic gain predicts.
* A surviving photon lands in a uniform slot of the overlap window, i.e. a
  Bob index ``i_B`` whose partner ``j_A = i_B + (-1)**b r`` is also in
  1..L. It fires the detector ``s_A[j_A] xor s_B[i_B]``, flipped with
  probability ``e_d``.
* A surviving dark click lands in a uniform slot 1..L on a random detector.
  A lone dark click whose slot has no partner pulse cannot be announced, so
  that train is not effective.
* The train is effective iff exactly one click survives in total.

Trains are simulated in fixed-size shards with seeds spawned from the run
seed, so results do not depend on the worker count.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import IO, Iterator, Optional, Tuple, Union

import numpy as np

from .keyrate import ProtocolParams, gain, bit_error_rate
from .model import Geometry, SystemParams, arm_transmittance

__all__ = [
    "TrainConfig",
    "TrainOutcome",
    "SimStats",
    "ValidationReport",
    "InsufficientStatistics",
    "run_train",
    "run_batch",
    "iter_outcomes",
    "validate_against_analytic",
]

_BITS_PER_SHARD = 1 << 22


class InsufficientStatistics(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    sys: SystemParams
    proto: ProtocolParams
    geom: Geometry
    trains: int
    seed: Union[int, Tuple[int, ...]] = 0
    """Entropy for :class:`numpy.random.SeedSequence`; a tuple such as
    ``(run_seed, point_index)`` gives independent streams per check point."""

    def __post_init__(self):
        if int(self.trains) != self.trains or self.trains < 1:
            raise ValueError(f"trains must be a positive integer, got {self.trains}")

    @property
    def shard_size(self) -> int:
        return max(1, _BITS_PER_SHARD // self.proto.L)


@dataclass(frozen=True)
class TrainOutcome:
    """Result of one train. Index fields are 1-based and ``None`` unless effective."""

    effective: bool
    r: int
    b: int
    j_A: Optional[int] = None
    i_B: Optional[int] = None
    X_A: Optional[int] = None
    X_B: Optional[int] = None
    X_C: Optional[int] = None
    error: Optional[bool] = None
    dark: Optional[bool] = None


def _simulate_block(cfg: TrainConfig, rng: np.random.Generator, n: int) -> dict:
    sys, L, mu = cfg.sys, cfg.proto.L, cfg.proto.mu
    arm_eta = arm_transmittance(sys, cfg.geom)

    s_A = rng.integers(0, 2, size=(n, L), dtype=np.uint8)
    s_B = rng.integers(0, 2, size=(n, L), dtype=np.uint8)
    r = rng.integers(1, L, size=n)
    b = rng.integers(0, 2, size=n)
    sign = 1 - 2 * b

    photons = rng.binomial(rng.poisson(2.0 * mu * arm_eta, size=n), 0.5)
    darks = rng.binomial(L, 0.5 * sys.p_d, size=n)
    # slot draws for both click kinds; only one is used per effective train
    u_photon = rng.random(n)
    u_dark = rng.random(n)
    flip = rng.random(n) < sys.e_d
    dark_bit = rng.integers(0, 2, size=n)

    # overlap window for Bob index (0-based): b=0 -> [0, L-r), b=1 -> [r, L)
    width = L - r
    i_photon = np.minimum((u_photon * width).astype(np.int64), width - 1) + b * r
    i_dark = np.minimum((u_dark * L).astype(np.int64), L - 1)

    single = (photons + darks) == 1
    is_dark = single & (darks == 1)
    i_B = np.where(is_dark, i_dark, i_photon)
    j_A = i_B + sign * r
    in_range = (j_A >= 0) & (j_A < L)
    effective = single & in_range

    rows = np.arange(n)
    j_safe = np.clip(j_A, 0, L - 1)
    X_A = s_A[rows, j_safe]
    X_B = s_B[rows, i_B]
    X_C = np.where(is_dark, dark_bit, (X_A ^ X_B) ^ flip)
    error = (X_A ^ X_B) != X_C
    return {
        "effective": effective, "r": r, "b": b, "j_A": j_A + 1, "i_B": i_B + 1,
        "X_A": X_A, "X_B": X_B, "X_C": X_C, "error": error & effective, "dark": is_dark,
    }


def _outcome(block: dict, k: int) -> TrainOutcome:
    r, b = int(block["r"][k]), int(block["b"][k])
    if not block["effective"][k]:
        return TrainOutcome(False, r, b)
    return TrainOutcome(
        True, r, b,
        j_A=int(block["j_A"][k]), i_B=int(block["i_B"][k]),
        X_A=int(block["X_A"][k]), X_B=int(block["X_B"][k]), X_C=int(block["X_C"][k]),
        error=bool(block["error"][k]), dark=bool(block["dark"][k]),
    )


def run_train(cfg: TrainConfig, rng: np.random.Generator) -> TrainOutcome:
    """Simulate a single train with the caller's generator."""
    return _outcome(_simulate_block(cfg, rng, 1), 0)


def _shards(cfg: TrainConfig):
    size = cfg.shard_size
    count = math.ceil(cfg.trains / size)
    seeds = np.random.SeedSequence(cfg.seed).spawn(count)
    for idx, ss in enumerate(seeds):
        yield ss, min(size, cfg.trains - idx * size)


def _run_shard(args) -> dict:
    cfg, ss, n = args
    return _simulate_block(cfg, np.random.default_rng(ss), n)


def _blocks(cfg: TrainConfig, workers: int = 1) -> Iterator[dict]:
    jobs = [(cfg, ss, n) for ss, n in _shards(cfg)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(_run_shard, jobs)
    else:
        for job in jobs:
            yield _run_shard(job)


def iter_outcomes(cfg: TrainConfig) -> Iterator[TrainOutcome]:
    """Per-train outcomes in train order."""
    for block in _blocks(cfg):
        for k in range(len(block["r"])):
            yield _outcome(block, k)


@dataclass(frozen=True)
class SimStats:
    """Aggregated counts and empirical estimates.

    ``index_counts[k]`` counts effective trains announcing ``i_B = k + 1``;
    ``offset_counts`` maps the signed offset ``j_A - i_B`` to its count.
    """

    trains: int
    effective_count: int
    error_count: int
    dark_count: int
    index_counts: tuple
    offset_counts: dict

    @property
    def Q_emp(self) -> float:
        return self.effective_count / self.trains

    @property
    def Q_se(self) -> float:
        q = self.Q_emp
        return math.sqrt(q * (1 - q) / self.trains)

    @property
    def e_b_emp(self) -> Optional[float]:
        if self.effective_count == 0:
            return None
        return self.error_count / self.effective_count

    @property
    def e_b_se(self) -> Optional[float]:
        e = self.e_b_emp
        if e is None:
            return None
        return math.sqrt(e * (1 - e) / self.effective_count)

    def as_dict(self) -> dict:
        return {
            "trains": self.trains, "effective_count": self.effective_count,
            "error_count": self.error_count, "dark_count": self.dark_count,
            "Q_emp": self.Q_emp, "Q_se": self.Q_se,
            "e_b_emp": self.e_b_emp, "e_b_se": self.e_b_se,
            "index_counts": list(self.index_counts),
            "offset_counts": {str(k): v for k, v in sorted(self.offset_counts.items())},
        }


def _write_trace(fh: IO[str], block: dict, start: int) -> None:
    for k in range(len(block["r"])):
        rec = asdict(_outcome(block, k))
        rec["train"] = start + k
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def run_batch(cfg: TrainConfig, workers: int = 1, trace: Optional[IO[str]] = None) -> SimStats:
    """Simulate ``cfg.trains`` trains and aggregate.

    If ``trace`` is given, one JSON object per train is written to it
    (keys: train, effective, r, b, j_A, i_B, X_A, X_B, X_C, error, dark).
    """
    L = cfg.proto.L
    eff = err = dark = 0
    index_counts = np.zeros(L, dtype=np.int64)
    offsets: dict = {}
    start = 0
    for block in _blocks(cfg, workers):
        m = block["effective"]
        eff += int(m.sum())
        err += int(block["error"].sum())
        dark += int((block["dark"] & m).sum())
        index_counts += np.bincount(block["i_B"][m] - 1, minlength=L)
        off, cnt = np.unique(block["j_A"][m] - block["i_B"][m], return_counts=True)
        for o, c in zip(off.tolist(), cnt.tolist()):
            offsets[o] = offsets.get(o, 0) + c
        if trace is not None:
            _write_trace(trace, block, start)
        start += len(m)
    return SimStats(cfg.trains, eff, err, dark, tuple(index_counts.tolist()), offsets)


@dataclass(frozen=True)
class ValidationReport:
    Q_emp: float
    Q_analytic: float
    z_Q: float
    e_b_emp: Optional[float]
    e_b_analytic: float
    z_e_b: float
    effective_count: int
    trains: int
    threshold: float = 3.0

    @property
    def passed(self) -> bool:
        return abs(self.z_Q) <= self.threshold and abs(self.z_e_b) <= self.threshold

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _z(observed, expected, se):
    if se > 0:
        return (observed - expected) / se
    return 0.0 if observed == expected else math.inf


def validate_against_analytic(cfg: TrainConfig, reference: Optional[SystemParams] = None,
                              workers: int = 1, min_expected: float = 100.0) -> ValidationReport:
    """Compare simulated gain and bit error with the closed forms.

    ``reference`` replaces the system parameters used for the analytic side,
    which is how a corrupted-parameter negative control is built. Standard
    errors use the analytic probabilities.
    """
    ref = reference or cfg.sys
    Q = gain(ref, cfg.proto, cfg.geom)
    e_b = bit_error_rate(ref, cfg.proto, cfg.geom)
    if Q * cfg.trains < min_expected:
        raise InsufficientStatistics(
            f"expected {Q * cfg.trains:.1f} effective trains, need >= {min_expected:g}")
    stats = run_batch(cfg, workers=workers)
    z_Q = _z(stats.Q_emp, Q, math.sqrt(Q * (1 - Q) / cfg.trains))
    if stats.effective_count:
        z_eb = _z(stats.e_b_emp, e_b, math.sqrt(e_b * (1 - e_b) / stats.effective_count))
    else:
        z_eb = math.inf
    return ValidationReport(stats.Q_emp, Q, z_Q, stats.e_b_emp, e_b, z_eb,
                            stats.effective_count, cfg.trains)
