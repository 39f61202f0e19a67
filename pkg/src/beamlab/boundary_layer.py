"""Mode eigenvectors and the boundary lifting that cancels an incident trace.

All modes have the form ``X exp(-i omega t + i k x - lambda y)``; interior
waves use ``lambda = -i m``.  Every function broadcasts over array inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charpoly import RootTriple

LIFT_COND_LIMIT = 1e12


class LiftError(np.linalg.LinAlgError):
    """The boundary lifting matrix is too ill conditioned to trust."""


@dataclass(frozen=True)
class ModeVector:
    """Amplitudes of ``(u, w, b, p)`` for one mode (arrays broadcast)."""

    U: np.ndarray
    W: np.ndarray
    B: np.ndarray
    P: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.U, self.W, self.B, self.P), axis=-1)


@dataclass(frozen=True)
class LiftCoefficients:
    """Amplitudes ``a_j`` multiplying the three decaying modes, shape ``(..., 3)``."""

    a: np.ndarray
    cond: np.ndarray

    @property
    def a1(self):
        return self.a[..., 0]

    @property
    def a2(self):
        return self.a[..., 1]

    @property
    def a3(self):
        return self.a[..., 2]


def system_matrix(k, lam, omega_val, p) -> np.ndarray:
    """Linearized operator acting on ``(U, W, B, P)``; shape ``(..., 4, 4)``."""
    eps, nu0, kappa0, gamma = p.eps, p.nu0, p.kappa0, p.gamma
    k, lam, w = np.broadcast_arrays(np.asarray(k, complex), np.asarray(lam, complex),
                                    np.asarray(omega_val, complex))
    s, c = np.sin(gamma), np.cos(gamma)
    lap = lam * lam - k * k
    mom = -1j * w - eps * nu0 * lap
    heat = -1j * w - eps * kappa0 * lap
    out = np.zeros(k.shape + (4, 4), complex)
    out[..., 0, 0] = mom
    out[..., 0, 2] = -s
    out[..., 0, 3] = 1j * k
    out[..., 1, 1] = mom
    out[..., 1, 2] = -c
    out[..., 1, 3] = -lam
    out[..., 2, 0] = s
    out[..., 2, 1] = c
    out[..., 2, 2] = heat
    out[..., 3, 0] = 1j * k
    out[..., 3, 1] = -lam
    return out


def eigenvector_bl(k, lam, omega_val, p) -> ModeVector:
    """Kernel vector of ``system_matrix`` with unit along-slope velocity.

    ``p`` supplies ``eps``, ``nu0``, ``kappa0`` and ``gamma``.
    """
    eps, nu0, kappa0, gamma = p.eps, p.nu0, p.kappa0, p.gamma
    k = np.asarray(k, complex)
    lam = np.asarray(lam, complex)
    w = np.asarray(omega_val, complex)
    if np.any(lam == 0) or np.any(k == 0):
        raise ValueError("boundary-layer eigenvector needs nonzero k and lambda")
    s, c = np.sin(gamma), np.cos(gamma)
    lap = lam * lam - k * k
    heat = 1j * w + eps * kappa0 * lap
    if np.any(heat == 0):
        raise ValueError("buoyancy denominator vanishes")
    U = np.ones(np.broadcast_shapes(k.shape, lam.shape, w.shape), complex)
    W = 1j * k / lam * U
    B = (s + 1j * k * c / lam) / heat
    P = (1j * w + eps * nu0 * lap + s * B) / (1j * k)
    return ModeVector(U, W, B, P)


def eigenvector_interior(kv, omega_val, gamma) -> ModeVector:
    """Inviscid plane-wave eigenvector for ``exp(i(kx + my - omega t))``."""
    k = np.asarray(kv.k, float)
    m = np.asarray(kv.m, float)
    w = np.asarray(omega_val, float)
    if np.any(m == 0) or np.any(k == 0) or np.any(w == 0):
        raise ValueError("interior eigenvector needs nonzero k, m and omega")
    s, c = np.sin(gamma), np.cos(gamma)
    U = np.ones(np.broadcast_shapes(k.shape, m.shape, w.shape), complex)
    W = -k / m * U
    B = 1j * (k * c - m * s) / (m * w) * U
    P = (w + s * (k * c - m * s) / (m * w)) / k * U
    return ModeVector(U, W, B, P)


def lift_matrix(k, lambdas, omega_val, p) -> np.ndarray:
    """Rows ``U_j``, ``W_j`` and ``-lambda_j B_j`` (the wall-normal buoyancy flux)."""
    lambdas = np.asarray(lambdas, complex)
    k = np.asarray(k, complex)[..., None]
    w = np.asarray(omega_val, complex)[..., None]
    vec = eigenvector_bl(k, lambdas, w, p)
    return np.stack([vec.U, vec.W, -lambdas * vec.B], axis=-2)


def lift_boundary(trace, roots, k, omega_val, p,
                  cond_limit: float = LIFT_COND_LIMIT) -> LiftCoefficients:
    """Amplitudes whose boundary-layer trace equals ``-trace``.

    ``trace`` holds ``(u, w, d_y b)`` at ``y = 0`` in its last axis.  Rows are
    equilibrated before solving; the condition number is checked after scaling.
    """
    lambdas = roots.lambdas if isinstance(roots, RootTriple) else np.asarray(roots, complex)
    trace = np.asarray(trace, complex)
    mat = lift_matrix(k, lambdas, omega_val, p)
    row_scale = np.max(np.abs(mat), axis=-1, keepdims=True)
    scaled = mat / row_scale
    cond = np.linalg.cond(scaled)
    if np.any(~np.isfinite(cond)) or np.any(cond > cond_limit):
        worst = np.nanmax(np.where(np.isfinite(cond), cond, np.inf))
        raise LiftError(f"lifting matrix condition number {worst:.3g} exceeds {cond_limit:.3g}")
    rhs = -trace / row_scale[..., 0]
    a = np.linalg.solve(scaled, rhs[..., None])[..., 0]
    return LiftCoefficients(a, cond)


def lift_leading_order(trace, lambdas, k, omega_val, p) -> np.ndarray:
    """Lift amplitudes from the dominant part of the lifting matrix.

    The buoyancy row keeps only ``lambda_j sin(gamma)`` over the frequency and
    slope-normal diffusion; the inverse is the explicit adjugate.
    """
    lambdas = np.asarray(lambdas, complex)
    k = np.asarray(k, complex)[..., None]
    w = np.asarray(omega_val, complex)[..., None]
    row3 = -lambdas * np.sin(p.gamma) / (1j * w + p.eps * p.kappa0 * lambdas ** 2)
    mat = np.stack([np.ones_like(lambdas), 1j * k / lambdas, row3], axis=-2)
    adj = np.empty_like(mat)
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(mat, j, axis=-2), i, axis=-1)
            adj[..., i, j] = (-1) ** (i + j) * (minor[..., 0, 0] * minor[..., 1, 1]
                                                 - minor[..., 0, 1] * minor[..., 1, 0])
    det = np.sum(mat[..., 0, :] * adj[..., :, 0], axis=-1)
    return -np.einsum("...ij,...j->...i", adj, np.asarray(trace, complex)) / det[..., None]


def lifted_trace(a, lambdas, k, omega_val, p) -> np.ndarray:
    """``(u, w, d_y b)`` at the wall of the boundary-layer sum with amplitudes ``a``."""
    mat = lift_matrix(k, lambdas, omega_val, p)
    return np.einsum("...ij,...j->...i", mat, np.asarray(a, complex))


def interior_trace(kv, omega_val, gamma) -> np.ndarray:
    """``(u, w, d_y b)`` at the wall for a unit-amplitude interior plane wave."""
    vec = eigenvector_interior(kv, omega_val, gamma)
    return np.stack([vec.U, vec.W, 1j * np.asarray(kv.m) * vec.B], axis=-1)
