"""Spectral amplitudes, beam and boundary-layer-beam fields, norms and localization.

Beams are integrals of plane waves over a compactly supported amplitude in
``(|k|, theta)``.  They are realized exactly as lattice sums whose spacing is
set by a periodic cell (``fields.BeamBox``); by Poisson summation the lattice
sum equals the cell-periodized integral.  Only the lobe ``theta ~ gamma`` is
stored: the lobe ``theta ~ gamma + pi`` is its complex conjugate, so the real
field is ``2 Re`` of the stored sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .boundary_layer import eigenvector_bl, eigenvector_interior, lift_boundary
from .charpoly import CharPolyParams, roots_bruteforce, select_decaying
from .dispersion import PhysParams, Wavevector, incident_branch
from .fields import BeamBox, Field, Grid, ModalField, concat

DEFAULT_GAMMA = math.pi / 3
REFERENCE_EPS = 1e-4
REFERENCE_SIGMA_EXPONENT = 0.1

TAG_INCIDENT, TAG_BL13, TAG_BL12 = 0, 1, 2


class BeamResolutionError(ValueError):
    """A grid cannot resolve the oscillations of a field."""


def bump(s):
    """Smooth bump ``exp(1 - 1/(1 - s^2))`` on ``|s| < 1``, zero elsewhere; peak value 1."""
    s = np.asarray(s, float)
    inside = np.abs(s) < 1
    safe = np.where(inside, s, 0.0)
    return np.where(inside, np.exp(1 - 1 / (1 - safe * safe)), 0.0)


@dataclass(frozen=True)
class SpectralAmplitude:
    """Amplitude ``chi(sigma|k|) * angular factor * prefactor`` of order ``(p, q)``.

    The radial profile is a bump on ``sigma|k|`` in ``[r_lo, r_hi]``; the angular
    factor is a product of bumps in ``(sin theta - sin gamma)/eps^(1/3)`` and
    ``(cos theta - cos gamma)/eps^(1/3)`` scaled to half-width ``angular_width``.
    ``prefactor(eps, kmod, theta)`` defaults to ``eps^p kmod^q``.
    """

    order_p: float = 0.0
    order_q: float = 0.0
    r_lo: float = 0.5
    r_hi: float = 2.0
    angular_width: float = 1.0
    prefactor: Callable | None = None

    def chi(self, r):
        mid, half = (self.r_hi + self.r_lo) / 2, (self.r_hi - self.r_lo) / 2
        return bump((np.asarray(r, float) - mid) / half)

    def chiprime(self, s):
        return bump(np.asarray(s, float) / self.angular_width)

    def coefficient(self, eps, kmod, theta):
        if self.prefactor is not None:
            return self.prefactor(eps, kmod, theta)
        return eps ** self.order_p * np.asarray(kmod, float) ** self.order_q

    def angular_halfwidth(self, eps: float, gamma: float) -> float:
        """Half-width in ``theta`` enclosing the angular support."""
        scale = self.angular_width * eps ** (1 / 3)
        return min(math.pi / 2, 1.05 * math.asin(min(1.0, scale)) * math.sqrt(2) + 1e-12)


def psi_hat(kmod, theta, p: PhysParams, amp: SpectralAmplitude):
    """Beam amplitude at ``(|k|, theta)``; both angular lobes are included."""
    kmod = np.asarray(kmod, float)
    theta = np.asarray(theta, float)
    e3 = p.eps ** (1 / 3)
    sg, cg = math.sin(p.gamma), math.cos(p.gamma)
    st, ct = np.sin(theta), np.cos(theta)
    lobes = (amp.chiprime((st - sg) / e3) * amp.chiprime((ct - cg) / e3)
             + amp.chiprime((st + sg) / e3) * amp.chiprime((ct + cg) / e3))
    radial = amp.chi(p.sigma * kmod)
    value = radial * lobes
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(value != 0, amp.coefficient(p.eps, np.where(kmod > 0, kmod, 1.0), theta), 0.0)
    out = np.where(kmod >= p.eta, value * coef, 0.0)
    return out if out.ndim else out[()]


@dataclass(frozen=True)
class BeamSpec:
    """A beam or boundary-layer beam built from an amplitude.

    ``kind`` is ``"interior"`` (vertical dependence ``exp(i m y)``) or
    ``"boundary_layer"`` (``exp(-lambda y)`` with ``lambda = eps^(-alpha) ell |k|^beta``
    unless ``decay`` supplies ``lambda(k, m, omega)``).  ``mode`` selects the
    component vector: ``"eigen"`` uses the interior eigenvector (interior kind),
    ``"unit"`` puts the scalar beam in the ``u`` slot.  The global prefactor
    ``sigma eps^(-1/6)`` is always applied; ``normalize`` adds the constant that
    gives the incident beam unit L2 norm at the reference point.
    """

    params: PhysParams
    amplitude: SpectralAmplitude = SpectralAmplitude()
    kind: str = "interior"
    mode: str = "eigen"
    alpha: float = 0.0
    beta: float = 0.0
    ell: complex = 1.0
    decay: Callable | None = None
    normalize: bool = False
    length_factor: float = 3.0
    width_factor: float = 6.0

    def __post_init__(self):
        if self.kind not in ("interior", "boundary_layer"):
            raise ValueError(f"unknown beam kind {self.kind!r}")
        if self.mode not in ("eigen", "unit"):
            raise ValueError(f"unknown mode selector {self.mode!r}")
        if self.kind == "boundary_layer" and self.mode == "eigen" and self.decay is None:
            raise ValueError("eigen mode vectors for a boundary layer need an explicit decay")

    @property
    def box(self) -> BeamBox:
        p = self.params
        return BeamBox.for_beam(p.eps, p.sigma, p.gamma, p.x0, self.length_factor, self.width_factor)

    @property
    def order(self) -> tuple:
        if self.kind == "interior":
            return (self.amplitude.order_p, self.amplitude.order_q)
        return (self.alpha, self.beta, self.amplitude.order_p, self.amplitude.order_q)

    def modal(self, box: BeamBox | None = None, lobe: int = 1) -> ModalField:
        return beam_modes(self, self.box if box is None else box, lobe)


def lattice_points(p: PhysParams, amp: SpectralAmplitude, box: BeamBox, lobe: int = 1):
    """Lattice wavevectors ``(k, m)`` with nonzero amplitude in one angular lobe.

    Returns ``(kidx, k, m, kmod, theta, psi)``.
    """
    theta0 = p.gamma if lobe > 0 else p.gamma + math.pi
    half = amp.angular_halfwidth(p.eps, p.gamma)
    r_lo = max(amp.r_lo / p.sigma, p.eta)
    r_hi = amp.r_hi / p.sigma
    th = np.linspace(theta0 - half, theta0 + half, 129)
    rr = np.linspace(r_lo, r_hi, 33)
    tt, rg = np.meshgrid(th, rr)
    ks = rg * np.sin(tt + p.gamma)
    ms = rg * np.cos(tt + p.gamma)
    pad_k, pad_m = 2 * box.dk, 2 * box.dm
    j = np.arange(math.floor((ks.min() - pad_k) / box.dk), math.ceil((ks.max() + pad_k) / box.dk) + 1)
    l = np.arange(math.floor((ms.min() - pad_m) / box.dm), math.ceil((ms.max() + pad_m) / box.dm) + 1)
    jj, ll = np.meshgrid(j, l, indexing="ij")
    k = jj.ravel() * box.dk
    m = ll.ravel() * box.dm
    kmod = np.hypot(k, m)
    theta = Wavevector(k, m).theta(p.gamma)
    theta = np.mod(theta - theta0 + math.pi, 2 * math.pi) - math.pi + theta0
    local = np.abs(theta - theta0) <= half
    with np.errstate(invalid="ignore", divide="ignore"):
        psi = np.where(local & (kmod > 0), psi_hat(np.where(kmod > 0, kmod, 1.0), theta, p, amp), 0.0)
    keep = np.abs(psi) > 0
    return jj.ravel()[keep], k[keep], m[keep], kmod[keep], theta[keep], psi[keep]


def _prefactor(spec: BeamSpec) -> float:
    p = spec.params
    scale = p.sigma * p.eps ** (-1 / 6)
    if spec.normalize:
        scale *= incident_normalization(p.gamma, p.nu0, p.kappa0, spec.amplitude,
                                        spec.length_factor, spec.width_factor)
    return scale


def beam_modes(spec: BeamSpec, box: BeamBox, lobe: int = 1) -> ModalField:
    """Lattice-sum representation of a beam; ``lobe=-1`` gives the mirrored lobe explicitly."""
    p = spec.params
    kidx, k, m, kmod, theta, psi = lattice_points(p, spec.amplitude, box, lobe)
    if k.size == 0:
        return ModalField.empty(box, "beam")
    kv = Wavevector(k, m)
    w = incident_branch(kv, p.gamma)
    good = np.isfinite(w)
    kidx, k, m, kmod, theta, psi, w = (a[good] for a in (kidx, k, m, kmod, theta, psi, w))
    kv = Wavevector(k, m)
    weight = _prefactor(spec) * box.dk * box.dm * psi
    if spec.kind == "interior":
        decay = -1j * m
        if spec.mode == "eigen":
            vec = eigenvector_interior(kv, w, p.gamma).as_array()[:, :3]
        else:
            vec = np.tile(np.array([1.0, 0.0, 0.0], complex), (k.size, 1))
    else:
        if spec.decay is not None:
            decay = np.asarray(spec.decay(k, m, w), complex)
        else:
            decay = p.eps ** (-spec.alpha) * spec.ell * kmod ** spec.beta * np.ones_like(k, dtype=complex)
        if lobe < 0:
            decay = np.conj(decay)
        if np.any(decay.real <= 0):
            raise ValueError("boundary-layer decay must have positive real part on the support")
        if spec.mode == "eigen":
            vec = eigenvector_bl(k, decay, w, p).as_array()[:, :3]
        else:
            vec = np.tile(np.array([1.0, 0.0, 0.0], complex), (k.size, 1))
    return ModalField(box, kidx, w, decay, vec * weight[:, None], "beam")


def check_resolution(modal: ModalField, grid: Grid):
    """Raise when the grid spacing cannot resolve the largest wavenumber."""
    if modal.size == 0:
        return
    kmax = float(np.max(np.abs(modal.K)))
    if kmax * grid.dx > math.pi / 2:
        raise BeamResolutionError(
            f"unresolved oscillation: |k|max*dx = {kmax * grid.dx:.3g} exceeds pi/2")


def eval_beam(spec: BeamSpec, grid: Grid, t: float = 0.0) -> Field:
    """Sample an interior beam on ``grid`` at time ``t``."""
    if spec.kind != "interior":
        raise ValueError("eval_beam needs an interior beam; use eval_bl_beam")
    modal = spec.modal()
    check_resolution(modal, grid)
    return modal.evaluate(grid, t)


def eval_bl_beam(spec: BeamSpec, grid: Grid, t: float = 0.0) -> Field:
    """Sample a boundary-layer beam on ``grid`` at time ``t``."""
    if spec.kind != "boundary_layer":
        raise ValueError("eval_bl_beam needs a boundary_layer beam")
    modal = spec.modal()
    check_resolution(modal, grid)
    thickness = 1 / float(np.max(modal.decay.real)) if modal.size else math.inf
    if grid.hy[0] > thickness:
        raise BeamResolutionError(
            f"wall spacing {grid.hy[0]:.3g} exceeds the layer thickness {thickness:.3g}")
    return modal.evaluate(grid, t)


@lru_cache(maxsize=64)
def incident_normalization(gamma: float, nu0: float = 1.0, kappa0: float = 1.0,
                           amp: SpectralAmplitude = SpectralAmplitude(),
                           length_factor: float = 3.0, width_factor: float = 6.0) -> float:
    """Constant making the incident beam's L2 norm one at the reference parameters."""
    eps = REFERENCE_EPS
    ref = PhysParams(eps=eps, sigma=eps ** REFERENCE_SIGMA_EXPONENT, gamma=gamma, nu0=nu0, kappa0=kappa0)
    spec = BeamSpec(ref, amp, length_factor=length_factor, width_factor=width_factor)
    norm = spec.modal().l2()
    if not norm > 0:
        raise ValueError("reference incident beam has zero norm")
    return 1.0 / norm


def plancherel_l2(spec: BeamSpec) -> float:
    """Closed-form L2 norm of the full-plane beam over one cell from its lattice amplitudes.

    Over the whole periodic cell the lattice modes are orthogonal, so the norm is
    ``sqrt(lx*ly*sum |c|^2)`` with both lobes counted.
    """
    modal = spec.modal()
    box = modal.box
    return math.sqrt(2 * box.lx * box.ly * float(np.sum(np.abs(modal.coef) ** 2)))


@dataclass
class BaseState:
    """The leading-order field: incident beam plus its two boundary-layer beams.

    ``roots`` holds the decaying roots per incident mode (moduli increasing); the
    first two form the thick layer, the third the thin one.  ``unit_lift`` are
    the lifting amplitudes for a unit-amplitude incident wave.
    """

    params: PhysParams
    incident: ModalField
    bl13: ModalField
    bl12: ModalField
    roots: np.ndarray
    unit_lift: np.ndarray
    lift_cond: np.ndarray

    @property
    def box(self) -> BeamBox:
        return self.incident.box

    @property
    def total(self) -> ModalField:
        return concat([self.incident, self.bl13, self.bl12], "w0")

    def part(self, name: str) -> ModalField:
        return {"inc": self.incident, "incident": self.incident, "bl13": self.bl13,
                "bl12": self.bl12, "w0": self.total}[name]


def boundary_modes(p: PhysParams, box: BeamBox, kidx, omega_vals, trace, tag_thick=TAG_BL13,
                   tag_thin=TAG_BL12):
    """Decaying modes that cancel the per-mode wall ``trace`` ``(u, w, d_y b)``.

    Returns ``(thick, thin, roots, amplitudes, cond)``; ``thick`` holds the two
    smallest-modulus roots and ``thin`` the largest.
    """
    kidx = np.asarray(kidx)
    k = kidx * box.dk
    cp = CharPolyParams(np.asarray(omega_vals, float), k, p.eps, p.nu0, p.kappa0, p.gamma)
    roots = select_decaying(roots_bruteforce(cp), 3)
    lift = lift_boundary(trace, roots, k, omega_vals, p)
    vec = eigenvector_bl(k[:, None], roots, np.asarray(omega_vals)[:, None], p).as_array()[..., :3]
    coef = lift.a[..., None] * vec
    def part(cols, tag):
        n = len(cols)
        return ModalField(box, np.repeat(kidx, n), np.repeat(omega_vals, n), roots[:, cols].ravel(),
                          coef[:, cols].reshape(-1, 3), tags=np.full(kidx.size * n, tag))
    return part([0, 1], tag_thick), part([2], tag_thin), roots, lift.a, lift.cond


def build_w0(p: PhysParams, amp: SpectralAmplitude = SpectralAmplitude(),
             length_factor: float = 3.0, width_factor: float = 6.0) -> BaseState:
    """Assemble the incident beam and the boundary layers cancelling its wall trace."""
    spec = BeamSpec(p, amp, normalize=True, length_factor=length_factor, width_factor=width_factor)
    inc = spec.modal()
    inc = ModalField(inc.box, inc.kidx, inc.omega, inc.decay, inc.coef, "incident",
                     np.full(inc.size, TAG_INCIDENT))
    thick, thin, roots, amps, cond = boundary_modes(p, inc.box, inc.kidx, inc.omega, inc.wall_trace())
    unit_lift = amps / inc.coef[:, :1]
    thick.label, thin.label = "bl13", "bl12"
    return BaseState(p, inc, thick, thin, roots, unit_lift, cond)


@dataclass(frozen=True)
class NormReport:
    l2: float
    linf: float
    orders: dict = field(default_factory=dict)


def norm_report(f: Field, orders: dict | None = None) -> NormReport:
    """L2 (Simpson in ``y``, rectangle rule in periodic ``x``) and max-abs norms."""
    return NormReport(f.l2(), f.linf(), dict(orders or {}))


@dataclass(frozen=True)
class OrderCheck:
    axis: str
    order_before: tuple
    order_after: tuple
    spec_after: BeamSpec
    field_after: ModalField


def derivative_order_check(spec: BeamSpec, axis: str) -> OrderCheck:
    """Order bookkeeping of a derivative together with the differentiated field.

    ``x`` raises ``q`` by one for either kind; ``y`` raises ``q`` by one for a
    beam and maps ``(alpha, beta, p, q)`` to ``(alpha, beta, p - alpha, q + beta)``
    for a boundary-layer beam.
    """
    if axis not in ("x", "y"):
        raise ValueError(f"unknown axis {axis!r}")
    amp = spec.amplitude
    if spec.kind == "interior" or axis == "x":
        new_p, new_q = amp.order_p, amp.order_q + 1
    else:
        new_p, new_q = amp.order_p - spec.alpha, amp.order_q + spec.beta
    new_amp = SpectralAmplitude(new_p, new_q, amp.r_lo, amp.r_hi, amp.angular_width, amp.prefactor)
    after = BeamSpec(spec.params, new_amp, spec.kind, spec.mode, spec.alpha, spec.beta, spec.ell,
                     spec.decay, spec.normalize, spec.length_factor, spec.width_factor)
    field_after = spec.modal().derivative(axis)
    return OrderCheck(axis, spec.order, after.order, after, field_after)


def cone_mask(grid: Grid, p: PhysParams, rho: float = 0.05, tilt: float | None = None) -> np.ndarray:
    """Indicator of the strip of half-width ``sigma^(1-rho)`` around the beam centreline.

    ``tilt`` defaults to ``eps^(1/2 - rho)``; pass 0 for the untilted strip.  The
    strip through ``x0`` at angle ``2 gamma + pi`` coincides with this one.
    """
    tilt = p.eps ** (0.5 - rho) if tilt is None else tilt
    xx, yy = np.meshgrid(grid.x, grid.y)
    ang = 2 * p.gamma + tilt
    proj = (xx - p.x0) * math.sin(ang) + yy * math.cos(ang)
    return (np.abs(proj) <= p.sigma ** (1 - rho)).astype(float)


def cone_energy_fraction(f: Field, p: PhysParams, rho: float = 0.05, tilt: float | None = None) -> float:
    """Share of the field's energy outside the localization strip."""
    total = f.l2() ** 2
    if total == 0:
        return 0.0
    outside = f.l2(1 - cone_mask(f.grid, p, rho, tilt)) ** 2
    return min(max(outside / total, 0.0), 1.0)


def wall_grid(box: BeamBox, p: PhysParams, ymax: float | None = None, points_per_sigma: float = 10.0,
              dmin: float | None = None) -> Grid:
    """Grid resolving the beam wavelength in ``x`` and the thin layer at the wall."""
    dx = p.sigma / points_per_sigma
    dmin = p.eps ** 0.5 / 8 if dmin is None else dmin
    return Grid.for_box(box, dx, dmin, p.sigma / points_per_sigma, ymax)
