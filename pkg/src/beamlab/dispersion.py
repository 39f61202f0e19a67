"""Coordinate rotations, the internal-wave dispersion relation and branch selection.

Wavevectors are written in slope-aligned coordinates: ``k`` along the slope and
``m`` normal to it.  The polar form uses the wavenumber modulus ``kmod`` and an
inclination ``theta`` measured so that ``k = kmod*sin(theta+gamma)`` and
``m = kmod*cos(theta+gamma)``.  With that convention the positive frequency
branch is simply ``sin(theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEGENERATE_TOL = 1e-12


class NonIncidentError(ValueError):
    """Raised when a wavevector has no branch with downward group velocity."""


@dataclass(frozen=True)
class PhysParams:
    """Dimensionless parameters of the viscous Boussinesq half-plane problem.

    ``nu`` and ``kappa`` are derived from ``eps`` and never stored.  Construction
    validates the admissible regime and raises ``ValueError`` naming the
    violated condition.
    """

    eps: float
    sigma: float
    gamma: float
    delta: float = 0.0
    nu0: float = 1.0
    kappa0: float = 1.0
    eta: float = 0.1
    mu: float = 0.12
    x0: float = 0.0
    delta_const: float = 1.0
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps={self.eps} must lie in (0, 1)")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma={self.sigma} must lie in (0, 1)")
        if not 0.0 < self.gamma < math.pi / 2:
            raise ValueError(
                f"gamma={self.gamma} violates the admissible range 0 < gamma < pi/2 "
                "(vertical propagation and flat bottom are excluded)")
        if self.nu0 <= 0.0 or self.kappa0 <= 0.0:
            raise ValueError("nu0 and kappa0 must be positive")
        if self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if self.delta < 0.0:
            raise ValueError("delta must be non-negative")
        if self.strict:
            if not 0.0 < self.mu < 0.125:
                raise ValueError(f"mu={self.mu} must lie in (0, 1/8)")
            if self.sigma <= self.eps ** self.mu:
                raise ValueError(
                    f"sigma={self.sigma} must exceed eps**mu={self.eps ** self.mu:.6g} "
                    "(beam width versus viscous scale)")
            if self.delta > self.delta_const * self.sigma ** (2 / 3) * self.eps ** 0.5 * (1 + 1e-12):
                raise ValueError(
                    f"delta={self.delta} exceeds {self.delta_const}*sigma^(2/3)*eps^(1/2)"
                    " (nonlinearity strength bound)")

    @property
    def nu(self) -> float:
        return self.eps * self.nu0

    @property
    def kappa(self) -> float:
        return self.eps * self.kappa0

    @property
    def sin_gamma(self) -> float:
        return math.sin(self.gamma)

    @property
    def cos_gamma(self) -> float:
        return math.cos(self.gamma)

    def replace(self, **changes) -> "PhysParams":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return PhysParams(**values)

    @staticmethod
    def delta_max(eps: float, sigma: float, const: float = 1.0) -> float:
        """Largest admissible nonlinearity strength for given ``eps`` and ``sigma``."""
        return const * sigma ** (2 / 3) * eps ** 0.5


@dataclass(frozen=True)
class Wavevector:
    """Slope-aligned wavevector ``(k, m)``; arrays are accepted componentwise."""

    k: float
    m: float

    @classmethod
    def from_polar(cls, kmod, theta, gamma) -> "Wavevector":
        return cls(kmod * np.sin(theta + gamma), kmod * np.cos(theta + gamma))

    @property
    def kmod(self):
        return np.hypot(self.k, self.m)

    def theta(self, gamma):
        """Inclination angle, reduced to ``[-pi, pi)`` relative to ``gamma``."""
        raw = np.arctan2(self.k, self.m) - gamma
        return np.mod(raw + np.pi, 2 * np.pi) - np.pi

    def scaled(self, factor) -> "Wavevector":
        return Wavevector(self.k * factor, self.m * factor)


def rotate_coords(x1, x2, angle):
    """Rotate Cartesian coordinates into the slope frame tilted by ``angle``."""
    c, s = np.cos(angle), np.sin(angle)
    return x1 * c + x2 * s, -x1 * s + x2 * c


def _check_nonzero(kv: Wavevector):
    if np.any(kv.kmod == 0):
        raise ValueError("zero wavevector has no frequency")


def omega(kv: Wavevector, gamma, branch=1):
    """Internal-wave frequency ``branch*(k cos(gamma) - m sin(gamma))/|k|``."""
    _check_nonzero(kv)
    return np.sign(branch) * (kv.k * np.cos(gamma) - kv.m * np.sin(gamma)) / kv.kmod


def group_velocity(kv: Wavevector, gamma, branch=1):
    """Gradient of ``omega`` with respect to ``(k, m)``."""
    _check_nonzero(kv)
    k, m = kv.k, kv.m
    r3 = kv.kmod ** 3
    slope_normal = m * np.cos(gamma) + k * np.sin(gamma)
    b = np.sign(branch)
    return b * m * slope_normal / r3, -b * k * slope_normal / r3


def incident_branch(kv: Wavevector, gamma):
    """Frequency on the branch whose vertical group velocity is negative.

    Scalars raise ``NonIncidentError`` on the degenerate set (vanishing vertical
    group velocity or vanishing frequency); arrays return NaN there.
    """
    _check_nonzero(kv)
    k, m = np.asarray(kv.k, float), np.asarray(kv.m, float)
    vertical_plus = -k * (m * np.cos(gamma) + k * np.sin(gamma)) / np.hypot(k, m) ** 3
    w_plus = (k * np.cos(gamma) - m * np.sin(gamma)) / np.hypot(k, m)
    degenerate = (np.abs(vertical_plus) < DEGENERATE_TOL) | (np.abs(w_plus) < DEGENERATE_TOL)
    branch = np.where(vertical_plus < 0, 1.0, -1.0)
    result = np.where(degenerate, np.nan, branch * w_plus)
    if result.ndim == 0:
        if degenerate:
            raise NonIncidentError(
                f"wavevector ({float(k)}, {float(m)}) is non-incident for gamma={gamma}")
        return float(result)
    return result


def criticality(omega_val, gamma):
    """Distance from critical reflection, ``omega^2 - sin(gamma)^2``."""
    return np.asarray(omega_val) ** 2 - np.sin(gamma) ** 2
