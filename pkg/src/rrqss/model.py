"""Hardware constants, channel transmittance and the repeaterless bound.

Distances are always the full Alice-to-Bob fiber length in km; Charlie sits
at the midpoint, so each arm carries half the loss.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "SystemParams",
    "Geometry",
    "TABLE1",
    "arm_transmittance",
    "channel_transmittance",
    "plob_bound",
]


@dataclass(frozen=True)
class SystemParams:
    """Detector and fiber constants.

    Attributes
    ----------
    eta_d : float
        Detector efficiency.
    p_d : float
        Dark-count probability per pulse slot.
    e_d : float
        Misalignment error rate (aggregate systematic error).
    alpha : float
        Fiber attenuation in dB/km.
    f : float
        Error-correction inefficiency.
    """

    eta_d: float = 0.56
    p_d: float = 1e-8
    e_d: float = 0.02
    alpha: float = 0.167
    f: float = 1.1

    def __post_init__(self):
        if not 0 < self.eta_d <= 1:
            raise ValueError(f"eta_d must be in (0, 1], got {self.eta_d}")
        if not 0 <= self.p_d < 1:
            raise ValueError(f"p_d must be in [0, 1), got {self.p_d}")
        if not 0 <= self.e_d <= 0.5:
            raise ValueError(f"e_d must be in [0, 0.5], got {self.e_d}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.f >= 1:
            raise ValueError(f"f must be >= 1, got {self.f}")

    def replace(self, **changes) -> "SystemParams":
        return type(self)(**{**self.__dict__, **changes})


TABLE1 = SystemParams()


@dataclass(frozen=True)
class Geometry:
    """Total Alice-Bob distance in km. Only the symmetric layout is supported."""

    D: float
    symmetric: bool = True

    def __post_init__(self):
        if not self.D >= 0:
            raise ValueError(f"distance must be >= 0, got {self.D}")
        if not self.symmetric:
            raise ValueError("asymmetric Charlie placement is not supported")


def arm_transmittance(params: SystemParams, geom: Geometry) -> float:
    """Efficiency of one arm (sender to Charlie), detector included.

    Equal to ``eta_d * 10**(-alpha*D/20)``; the detector efficiency enters once.
    """
    return params.eta_d * 10.0 ** (-params.alpha * geom.D / 20.0)


def channel_transmittance(params: SystemParams, geom: Geometry) -> float:
    """Full Alice-to-Bob transmittance ``eta_d * 10**(-alpha*D/10)``."""
    return params.eta_d * 10.0 ** (-params.alpha * geom.D / 10.0)


def plob_bound(params: SystemParams, geom: Geometry) -> float:
    """Repeaterless secret-key capacity ``-log2(1 - eta)`` in bits per pulse."""
    eta = channel_transmittance(params, geom)
    if eta >= 1.0:
        raise ValueError("PLOB bound diverges for unit transmittance")
    return -math.log1p(-eta) / math.log(2)
