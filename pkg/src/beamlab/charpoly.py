"""Boundary-layer characteristic polynomial, root oracles and certified localization.

A mode ``exp(i k x - lambda y - i omega t)`` solves the linearized viscous
system on the slope iff ``P(lambda) = 0`` for a degree-six polynomial whose
coefficients depend on ``(omega, k, eps, nu0, kappa0, gamma)``.  Coefficients
are stored in ascending powers of ``lambda`` throughout this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

UNIT_ROUNDOFF = np.finfo(float).eps / 2
REGIMES = ("critical", "meanflow", "secondharmonic")


class CertificationRejected(ValueError):
    """The Newton-Kantorovich hypothesis failed at the proposed center."""

    def __init__(self, reason: str, lhs: float = math.nan, rhs: float = math.nan):
        super().__init__(f"{reason} (lhs={lhs:.6g}, rhs={rhs:.6g})")
        self.reason = reason
        self.lhs = lhs
        self.rhs = rhs


class RegimeError(ValueError):
    """Parameters lie outside the validity region of an asymptotic expansion."""


@dataclass(frozen=True)
class CharPolyParams:
    """Inputs of the characteristic polynomial; ``zeta`` is always derived."""

    omega: float
    k: float
    eps: float
    nu0: float = 1.0
    kappa0: float = 1.0
    gamma: float = math.pi / 4

    @property
    def zeta(self):
        return np.asarray(self.omega) ** 2 - math.sin(self.gamma) ** 2

    @classmethod
    def from_phys(cls, phys, omega, k) -> "CharPolyParams":
        return cls(omega, k, phys.eps, phys.nu0, phys.kappa0, phys.gamma)


@dataclass(frozen=True)
class RegimeConstants:
    """Thresholds for the regime checks; ``sigma`` and ``eta`` bound ``|k|``."""

    c_low: float = 0.5
    c_high: float = 2.0
    eta: float | None = None
    sigma: float | None = None


def charpoly_coeffs(p: CharPolyParams) -> np.ndarray:
    """Ascending coefficients ``c0..c6``; broadcasts over array ``omega`` and ``k``."""
    w = np.asarray(p.omega, dtype=float)
    k = np.asarray(p.k, dtype=float)
    w, k = np.broadcast_arrays(w, k)
    eps, nu0, ka0 = p.eps, p.nu0, p.kappa0
    s, c = math.sin(p.gamma), math.cos(p.gamma)
    diff = ka0 + nu0
    prod = ka0 * nu0
    k2 = k * k
    out = np.zeros(w.shape + (7,), dtype=complex)
    out[..., 6] = -eps ** 2 * prod
    out[..., 4] = -1j * eps * w * diff + 3 * prod * eps ** 2 * k2
    out[..., 2] = (w * w - s * s) + 2j * w * diff * eps * k2 - 3 * prod * eps ** 2 * k2 * k2
    out[..., 1] = -2j * k * s * c
    out[..., 0] = k2 * (c * c - w * w - 1j * eps * w * diff * k2 + prod * eps ** 2 * k2 * k2)
    return out


def poly_derivative(coeffs: np.ndarray) -> np.ndarray:
    """Ascending coefficients of the derivative, same trailing length minus one."""
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[-1]
    if n == 1:
        return np.zeros_like(coeffs)
    return coeffs[..., 1:] * np.arange(1, n)


def poly_eval(coeffs: np.ndarray, z) -> np.ndarray:
    """Horner evaluation of ascending coefficients at ``z`` (broadcasting)."""
    coeffs = np.asarray(coeffs)
    z = np.asarray(z)
    acc = np.zeros(np.broadcast_shapes(coeffs.shape[:-1], z.shape), dtype=complex)
    for j in range(coeffs.shape[-1] - 1, -1, -1):
        acc = acc * z + coeffs[..., j]
    return acc


def charpoly_eval(lam, p: CharPolyParams, deriv: int = 0):
    """``P(lambda)`` or its ``deriv``-th derivative."""
    coeffs = charpoly_coeffs(p)
    for _ in range(deriv):
        coeffs = poly_derivative(coeffs)
    value = poly_eval(coeffs, lam)
    return complex(value) if value.ndim == 0 else value


def _trim_degree(coeffs: np.ndarray) -> np.ndarray:
    nz = np.nonzero(coeffs)[0]
    if nz.size == 0:
        raise ValueError("identically zero polynomial has no roots")
    return coeffs[: nz[-1] + 1]


def _root_scale(coeffs: np.ndarray) -> np.ndarray:
    """Fujiwara-type modulus scale ``max_j |c_j/c_n|^(1/(n-j))`` per batch entry."""
    n = coeffs.shape[-1] - 1
    lead = np.abs(coeffs[..., n:n + 1])
    ratios = np.abs(coeffs[..., :n]) / lead
    powers = ratios ** (1.0 / (n - np.arange(n)))
    scale = powers.max(axis=-1)
    return np.where(scale > 0, scale, 1.0)


def _newton_polish(coeffs: np.ndarray, roots: np.ndarray, passes: int = 4) -> np.ndarray:
    """Newton steps on the unscaled polynomial, kept only where they reduce ``|P|``."""
    d1 = poly_derivative(coeffs)
    c = coeffs[..., None, :]
    dc = d1[..., None, :]
    val = poly_eval(c, roots)
    for _ in range(passes):
        der = poly_eval(dc, roots)
        with np.errstate(divide="ignore", invalid="ignore"):
            trial = roots - val / der
        tval = poly_eval(c, trial)
        better = np.isfinite(trial) & (np.abs(tval) < np.abs(val))
        roots = np.where(better, trial, roots)
        val = np.where(better, tval, val)
    return roots


def polynomial_roots(coeffs: np.ndarray) -> np.ndarray:
    """All roots of ascending ``coeffs`` (batched over leading axes, nonzero leading term).

    The variable is rescaled by a modulus bound so that the companion matrix is
    well conditioned; LAPACK balancing and a Newton polish follow.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    n = coeffs.shape[-1] - 1
    if np.any(coeffs[..., n] == 0):
        raise ValueError("leading coefficient vanishes")
    if n == 0:
        return np.zeros(coeffs.shape[:-1] + (0,), dtype=complex)
    scale = _root_scale(coeffs)
    scaled = coeffs * scale[..., None] ** np.arange(n + 1)
    monic = scaled / scaled[..., n:n + 1]
    comp = np.zeros(coeffs.shape[:-1] + (n, n), dtype=complex)
    comp[..., 1:, :-1] = np.eye(n - 1)
    comp[..., :, -1] = -monic[..., :n]
    roots = np.linalg.eigvals(comp) * scale[..., None]
    return _newton_polish(coeffs, roots)


def roots_bruteforce(p: CharPolyParams) -> np.ndarray:
    """All roots of ``P``; the inviscid case returns the reduced-degree root set.

    Batched parameters give an array of shape ``(..., 6)`` sorted by real part.
    """
    coeffs = charpoly_coeffs(p)
    if p.eps == 0:
        if coeffs.ndim != 1:
            raise ValueError("the inviscid degree reduction is scalar only")
        reduced = _trim_degree(coeffs)
        roots = polynomial_roots(reduced)
    else:
        roots = polynomial_roots(coeffs)
    order = np.argsort(roots.real, axis=-1)
    return np.take_along_axis(roots, order, axis=-1)


def effective_degree(p: CharPolyParams) -> int:
    return _trim_degree(charpoly_coeffs(p)).size - 1


def roots_aberth(coeffs, iterations: int = 500, tol: float = 1e-14) -> np.ndarray:
    """Aberth-Ehrlich simultaneous iteration, independent of the eigenvalue route."""
    coeffs = _trim_degree(np.asarray(coeffs, dtype=complex))
    n = coeffs.size - 1
    d1 = poly_derivative(coeffs)
    radius = float(_root_scale(coeffs))
    z = radius * np.exp(2j * np.pi * (np.arange(n) + 0.25) / n) * (0.5 + 0.5 * np.arange(1, n + 1) / n)
    for _ in range(iterations):
        ratio = poly_eval(coeffs, z) / poly_eval(d1, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        repulsion = (1.0 / diff).sum(axis=1)
        step = ratio / (1 - ratio * repulsion)
        z = z - step
        if np.all(np.abs(step) <= tol * np.maximum(np.abs(z), 1e-300)):
            break
    return _newton_polish(coeffs, z)


def select_decaying(roots: np.ndarray, count: int = 3) -> np.ndarray:
    """The ``count`` roots of largest real part, ordered by increasing modulus."""
    order = np.argsort(-roots.real, axis=-1)[..., :count]
    chosen = np.take_along_axis(roots, order, axis=-1)
    by_mod = np.argsort(np.abs(chosen), axis=-1)
    return np.take_along_axis(chosen, by_mod, axis=-1)


@dataclass(frozen=True)
class Localization:
    """A certified disk ``|root - center| <= radius`` containing exactly one root."""

    center: complex
    radius: float
    lhs: float
    rhs: float

    @property
    def root(self) -> complex:
        return self.center

    def contains(self, z) -> bool:
        return abs(z - self.center) <= self.radius


def _rounding_bound(coeffs: np.ndarray, z: complex) -> float:
    n = max(coeffs.size - 1, 1)
    return 8 * n * UNIT_ROUNDOFF * float(np.sum(np.abs(coeffs) * abs(z) ** np.arange(coeffs.size)))


def newton_localize(poly, mu0: complex) -> Localization:
    """Certify a unique root of ``poly`` (ascending coefficients) within ``2|g|/|g'|`` of ``mu0``.

    Sup of ``|g''|`` on the disk uses the coefficient majorant
    ``sum |d_j| (|mu0| + 2r)^j``.  Evaluation rounding is added to ``|g|`` and
    subtracted from ``|g'|`` so that the check errs toward rejection.  A
    vanishing ``g''`` makes the hypothesis vacuous.
    """
    coeffs = np.asarray(poly, dtype=complex)
    mu0 = complex(mu0)
    d1 = poly_derivative(coeffs)
    d2 = poly_derivative(d1)
    g_up = abs(complex(poly_eval(coeffs, mu0))) + _rounding_bound(coeffs, mu0)
    gp_low = abs(complex(poly_eval(d1, mu0))) - _rounding_bound(d1, mu0)
    if gp_low <= 0:
        raise CertificationRejected("derivative vanishes at the center", g_up, 0.0)
    r = g_up / gp_low
    reach = abs(mu0) + 2 * r
    g2_sup = float(np.sum(np.abs(d2) * reach ** np.arange(d2.size)))
    if g2_sup == 0:
        return Localization(mu0, 2 * r, g_up, math.inf)
    rhs = gp_low ** 2 / (4 * g2_sup)
    if not g_up <= rhs:
        raise CertificationRejected("Newton-Kantorovich hypothesis fails", g_up, rhs)
    return Localization(mu0, 2 * r, g_up, rhs)


@dataclass
class RootTriple:
    """Three decaying roots with certified radii, as produced by the asymptotics."""

    lambdas: np.ndarray
    radii: np.ndarray
    regime: str
    seeds: np.ndarray
    seed_certified: np.ndarray
    fallback: np.ndarray
    brute_gap: np.ndarray = field(default_factory=lambda: np.full(3, np.nan))

    @property
    def lambda1(self) -> complex:
        return complex(self.lambdas[0])

    @property
    def lambda2(self) -> complex:
        return complex(self.lambdas[1])

    @property
    def lambda3(self) -> complex:
        return complex(self.lambdas[2])

    @property
    def certified(self) -> bool:
        return not bool(np.any(self.fallback))

    def disks_disjoint(self) -> bool:
        for i in range(3):
            for j in range(i + 1, 3):
                if abs(self.lambdas[i] - self.lambdas[j]) <= self.radii[i] + self.radii[j]:
                    return False
        return True


def _newton_converge(coeffs, d1, z: complex, steps: int = 8) -> tuple[complex, bool]:
    for _ in range(steps):
        der = complex(poly_eval(d1, z))
        if der == 0:
            return z, False
        step = complex(poly_eval(coeffs, z)) / der
        z -= step
        if abs(step) <= 1e-13 * max(abs(z), 1e-300):
            return z, True
    return z, False


def track_root(coeffs: np.ndarray, reduced: np.ndarray, seed: complex, steps: int = 32) -> complex:
    """Follow a root of ``reduced`` to a root of ``coeffs`` along the straight homotopy.

    ``seed`` is refined on ``reduced`` first; step halving guards against
    path jumping.  A final polish runs on the full polynomial.
    """
    coeffs = np.asarray(coeffs, complex)
    reduced = np.asarray(reduced, complex)
    gap = coeffs - reduced
    z, _ = _newton_converge(reduced, poly_derivative(reduced), complex(seed), 20)
    t, dt = 0.0, 1.0 / steps
    while t < 1.0:
        t_next = min(1.0, t + dt)
        target = reduced + t_next * gap
        prev_step = abs(z) * 1e-16
        trial, ok = _newton_converge(target, poly_derivative(target), z)
        if ok and abs(trial - z) <= 0.25 * max(abs(z), 1e-300) + prev_step:
            z, t = trial, t_next
            dt = min(2 * dt, 0.25)
        else:
            dt /= 2
            if dt < 1e-6:
                break
    z, _ = _newton_converge(coeffs, poly_derivative(coeffs), z, 20)
    return z


def _certify_seeds(p: CharPolyParams, seeds, reduced, regime: str) -> RootTriple:
    coeffs = charpoly_coeffs(p)
    brute = roots_bruteforce(p)
    lambdas = np.empty(3, complex)
    radii = np.empty(3)
    seed_ok = np.zeros(3, bool)
    fallback = np.zeros(3, bool)
    gaps = np.empty(3)
    for j, seed in enumerate(seeds):
        try:
            newton_localize(coeffs, seed)
            seed_ok[j] = True
        except CertificationRejected:
            pass
        refined = track_root(coeffs, reduced[j], seed)
        try:
            loc = newton_localize(coeffs, refined)
            inside = np.count_nonzero(np.abs(brute - loc.center) <= loc.radius + 1e-13 * abs(loc.center))
            duplicate = any(abs(refined - lambdas[i]) <= 1e-8 * abs(refined) for i in range(j))
            if inside != 1 or refined.real <= 0 or duplicate:
                raise CertificationRejected("certified disk does not isolate a new decaying root")
            lambdas[j], radii[j] = loc.center, loc.radius
        except CertificationRejected:
            nearest = brute[np.argmin(np.abs(brute - seed))]
            lambdas[j], radii[j], fallback[j] = nearest, math.nan, True
        gaps[j] = float(np.min(np.abs(brute - lambdas[j])))
    return RootTriple(lambdas, radii, regime, np.asarray(seeds, complex), seed_ok, fallback, gaps)


def _reduced(p: CharPolyParams, keep: dict) -> np.ndarray:
    """Coefficients of a dominant-balance polynomial; ``keep`` maps power to value."""
    out = np.zeros(7, complex)
    for power, value in keep.items():
        out[power] = value
    return out


def _leading_parts(p: CharPolyParams) -> dict:
    s, c = math.sin(p.gamma), math.cos(p.gamma)
    w, k = float(p.omega), float(p.k)
    return {
        "c6": -p.eps ** 2 * p.kappa0 * p.nu0,
        "c4": -1j * p.eps * w * (p.kappa0 + p.nu0),
        "c2": float(p.zeta),
        "c1": -2j * k * s * c,
        "c0": k * k * (c * c - w * w),
    }


def _check_kmod(kmod: float, regime: RegimeConstants):
    if regime.eta is not None and kmod < regime.eta:
        raise RegimeError(f"|k|={kmod:.6g} is below the lower cutoff eta={regime.eta:.6g}")
    if regime.sigma is not None and kmod > 1 / regime.sigma:
        raise RegimeError(f"|k|={kmod:.6g} exceeds 1/sigma={1 / regime.sigma:.6g}")


def critical_kmod_floor(p: CharPolyParams) -> float:
    """Smallest ``|k|`` for which the crude critical seeds satisfy the certificate."""
    s, c = math.sin(p.gamma), math.cos(p.gamma)
    zeta0 = abs(float(p.zeta)) / p.eps ** (1 / 3)
    w = abs(float(p.omega))
    return (16 * zeta0 ** 2 * (w * (p.kappa0 + p.nu0)) ** (2 / 3)
            / (2 ** (2 / 3) * abs(s * c) ** (5 / 3))) ** 0.6


def critical_seeds(p: CharPolyParams, kmod: float) -> np.ndarray:
    """Leading-order decay rates near critical reflection.

    The slow pair balances the along-slope advection against viscous damping,
    ``eps*omega*(kappa0+nu0)*lambda^3 = -2*k*sin(gamma)*cos(gamma)``, where ``k`` is
    the signed along-slope wavenumber (``kmod`` enters only through ``k``).
    The fast root balances the two diffusive terms.
    """
    s, c = math.sin(p.gamma), math.cos(p.gamma)
    w = float(p.omega)
    k = float(p.k)
    diff, prod = p.kappa0 + p.nu0, p.kappa0 * p.nu0
    base = abs(2 * k * s * c / (w * diff)) ** (1 / 3)
    ell = base * np.exp(1j * np.pi * np.array([1 / 3, 5 / 3]))
    slow = p.eps ** (-1 / 3) * ell
    fast = np.sqrt(-1j * w * diff / prod + 0j)
    fast = fast if fast.real > 0 else -fast
    return np.array([slow[0], slow[1], p.eps ** -0.5 * fast])


def critical_ell(p: CharPolyParams) -> tuple[complex, complex, complex]:
    """The scale-free leading coefficients ``ell_1, ell_2, ell_3`` near criticality."""
    s, c = math.sin(p.gamma), math.cos(p.gamma)
    w = float(p.omega)
    diff, prod = p.kappa0 + p.nu0, p.kappa0 * p.nu0
    base = abs(2 * s * c / (w * diff)) ** (1 / 3)
    ell3 = np.sqrt(-1j * w * diff / prod + 0j)
    ell3 = ell3 if ell3.real > 0 else -ell3
    return (complex(base * np.exp(1j * np.pi / 3)), complex(base * np.exp(5j * np.pi / 3)), complex(ell3))


def check_critical_detuning(p: CharPolyParams, regime: RegimeConstants = RegimeConstants()):
    """Raise ``RegimeError`` unless ``|omega|`` is ``O(eps^(1/3))``-detuned from ``sin(gamma)``."""
    gap = abs(abs(float(p.omega)) - math.sin(p.gamma))
    scale = p.eps ** (1 / 3)
    if not regime.c_low * scale < gap <= regime.c_high * scale:
        raise RegimeError(
            f"critical regime requires {regime.c_low}*eps^(1/3) < |omega -+ sin(gamma)| <= "
            f"{regime.c_high}*eps^(1/3); got {gap:.6g} with eps^(1/3)={scale:.6g}")


def asym_roots_critical(p: CharPolyParams, kmod: float, theta: float = math.nan,
                        regime: RegimeConstants = RegimeConstants(), check: bool = True) -> RootTriple:
    """Certified decaying roots for frequencies within ``O(eps^(1/3))`` of ``sin(gamma)``."""
    if check:
        check_critical_detuning(p, regime)
        _check_kmod(kmod, regime)
        floor = critical_kmod_floor(p)
        if kmod < floor:
            raise RegimeError(f"|k|={kmod:.6g} is below the certification floor {floor:.6g}")
    seeds = critical_seeds(p, kmod)
    lead = _leading_parts(p)
    slow = _reduced(p, {4: lead["c4"], 1: lead["c1"]})
    fast = _reduced(p, {6: lead["c6"], 4: lead["c4"]})
    return _certify_seeds(p, seeds, [slow, slow, fast], "critical")


def _slow_interior_root(p: CharPolyParams) -> complex:
    """O(|k|) root: inviscid quadratic plus its first viscous correction.

    Of the two inviscid roots, the one whose corrected real part is largest is
    the decaying one; when the inviscid roots are real-part free this is fixed
    by the sign of the viscous shift.
    """
    s, c = math.sin(p.gamma), math.cos(p.gamma)
    w, k = float(p.omega), float(p.k)
    zeta = float(p.zeta)
    root_term = np.sqrt(1 - w * w + 0j)
    candidates = [1j * k / zeta * (s * c + sgn * w * root_term) for sgn in (1.0, -1.0)]
    diff = p.kappa0 + p.nu0
    best, best_re = None, -math.inf
    for lam0 in candidates:
        viscous = -1j * p.eps * w * diff * (lam0 * lam0 - k * k) ** 2
        inviscid_der = 2 * zeta * lam0 - 2j * k * s * c
        lam = lam0 - viscous / inviscid_der
        if lam.real > best_re:
            best, best_re = lam, lam.real
    return complex(best)


def meanflow_ell(p: CharPolyParams) -> tuple[complex, complex]:
    s = math.sin(p.gamma)
    base = (s * s / (p.nu0 * p.kappa0)) ** 0.25
    return complex(base * np.exp(1j * np.pi / 4)), complex(base * np.exp(7j * np.pi / 4))


def _fast_pair(p: CharPolyParams) -> np.ndarray:
    """Roots of the diffusive balance ``-k0n0 l^4 - i w (k0+n0) l^2 + zeta = 0`` with Re > 0."""
    w = float(p.omega)
    diff, prod = p.kappa0 + p.nu0, p.kappa0 * p.nu0
    sq = np.roots([-prod, -1j * w * diff, float(p.zeta)])
    ells = np.sqrt(sq.astype(complex))
    ells = np.where(ells.real > 0, ells, -ells)
    ells = ells[np.argsort(ells.imag)[::-1]]
    return p.eps ** -0.5 * ells


def asym_roots_meanflow(p: CharPolyParams, k: float | None = None,
                        regime: RegimeConstants = RegimeConstants(), check: bool = True) -> RootTriple:
    """Certified decaying roots for frequencies of order ``eps^(1/3)``."""
    if k is not None and k != p.k:
        p = CharPolyParams(p.omega, k, p.eps, p.nu0, p.kappa0, p.gamma)
    if check:
        scale = p.eps ** (1 / 3)
        w = abs(float(p.omega))
        if not regime.c_low * scale < w <= regime.c_high * scale:
            raise RegimeError(
                f"mean-flow regime requires {regime.c_low}*eps^(1/3) < |omega| <= "
                f"{regime.c_high}*eps^(1/3); got |omega|={w:.6g}")
        _check_kmod(abs(float(p.k)), regime)
    ell2, ell3 = meanflow_ell(p)
    seeds = np.array([_slow_interior_root(p), p.eps ** -0.5 * ell2, p.eps ** -0.5 * ell3])
    lead = _leading_parts(p)
    slow = _reduced(p, {2: lead["c2"], 1: lead["c1"], 0: lead["c0"]})
    fast = _reduced(p, {6: lead["c6"], 2: lead["c2"]})
    return _certify_seeds(p, seeds, [slow, fast, fast], "meanflow")


def asym_roots_secondharmonic(p: CharPolyParams, k: float | None = None,
                              regime: RegimeConstants = RegimeConstants(), check: bool = True,
                              mu: float | None = None) -> RootTriple:
    """Certified decaying roots for order-one frequency away from criticality."""
    if k is not None and k != p.k:
        p = CharPolyParams(p.omega, k, p.eps, p.nu0, p.kappa0, p.gamma)
    if check:
        scale = p.eps ** (1 / 3)
        if abs(float(p.omega)) <= regime.c_high * scale:
            raise RegimeError(f"second-harmonic regime requires |omega| > {regime.c_high}*eps^(1/3)")
        if abs(float(p.zeta)) <= regime.c_high * scale:
            raise RegimeError(
                f"second-harmonic regime requires |omega^2 - sin(gamma)^2| > {regime.c_high}*eps^(1/3)")
        if mu is not None and not mu < 0.5:
            raise RegimeError(f"second-harmonic expansion requires mu < 1/2; got {mu}")
        _check_kmod(abs(float(p.k)), regime)
    seeds = np.concatenate([[_slow_interior_root(p)], _fast_pair(p)])
    lead = _leading_parts(p)
    slow = _reduced(p, {2: lead["c2"], 1: lead["c1"], 0: lead["c0"]})
    fast = _reduced(p, {6: lead["c6"], 4: lead["c4"], 2: lead["c2"]})
    return _certify_seeds(p, seeds, [slow, fast, fast], "secondharmonic")


def count_decaying(roots: np.ndarray) -> int:
    """Roots with positive real part beyond a rounding margin relative to their own modulus."""
    roots = np.asarray(roots)
    return int(np.count_nonzero(roots.real > 1e-10 * np.abs(roots)))
