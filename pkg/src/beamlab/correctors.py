"""Quadratic interactions, the first-order nonlinear corrector and its boundary lifting.

The advective product of two mode sums is again a mode sum: for real fields
``2 Re F`` and ``2 Re G`` the product ``(u d_x + w d_y) g`` contains "sum" modes
(frequency ``w + w'``, second harmonic) and "difference" modes (frequency
``w - w'``, mean flow).  The half-plane Leray projection acts on each mode in
closed form.  Grid versions of both operators are provided for sampled fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .beams import BaseState
from .boundary_layer import LIFT_COND_LIMIT, LiftError, eigenvector_bl, lift_boundary
from .charpoly import CharPolyParams, roots_bruteforce, select_decaying
from .dispersion import PhysParams
from .fields import Field, Grid, ModalField, _gram_weights, concat

PRODUCT_MF, PRODUCT_II = 0, 1
HARMONIC_TAG_OFFSET = 10

# label: (left part, right part, predicted L2 exponent in eps, in sigma, layer type)
INTERACTIONS = {
    "a1": ("bl13", "bl13", -1 / 6, -7 / 6, "eps^-1/3"),
    "a2": ("inc", "bl13", -1 / 6, -7 / 6, "eps^-1/3"),
    "b1": ("bl13", "bl12", -1 / 12, -7 / 6, "eps^-1/2"),
    "b2": ("inc", "bl12", -1 / 12, -7 / 6, "eps^-1/2"),
    "c1": ("inc", "inc", 1 / 6, -2.0, "none"),
    "c2": ("bl13", "inc", 1 / 6, -11 / 6, "eps^-1/3"),
    "d1": ("bl12", "bl13", 1 / 4, -11 / 6, "eps^-1/2"),
    "d2": ("bl12", "bl12", 1 / 4, -11 / 6, "eps^-1/2"),
    "d3": ("bl12", "inc", 5 / 12, -13 / 6, "eps^-1/2"),
}
CORRECTED = ("a1", "a2", "b1", "b2")


class DenominatorError(ArithmeticError):
    """A corrector resolvent denominator fell below the admissible bound."""


@dataclass(frozen=True)
class InteractionTerm:
    label: str
    left: str
    right: str
    predicted_l2: tuple
    predicted_decay: str

    @classmethod
    def from_label(cls, label: str) -> "InteractionTerm":
        left, right, pe, ps, decay = INTERACTIONS[label]
        return cls(label, left, right, (pe, ps), decay)


def modal_convection(left: ModalField, right: ModalField) -> ModalField:
    """``(u d_x + w d_y)`` of ``right`` advected by the velocity of ``left``, unprojected."""
    if left.box != right.box:
        raise ValueError("fields live on different cells")
    box = left.box
    if left.size == 0 or right.size == 0:
        return ModalField.empty(box, "product")
    ul, wl = left.coef[:, 0], left.coef[:, 1]
    kr, lr = right.K, right.decay
    sum_factor = ul[:, None] * (1j * kr)[None, :] - wl[:, None] * lr[None, :]
    diff_factor = ul[:, None] * (-1j * kr)[None, :] - wl[:, None] * np.conj(lr)[None, :]
    n, m = left.size, right.size
    sum_coef = sum_factor[:, :, None] * right.coef[None, :, :]
    diff_coef = diff_factor[:, :, None] * np.conj(right.coef)[None, :, :]
    kidx = np.concatenate([(left.kidx[:, None] + right.kidx[None, :]).ravel(),
                           (left.kidx[:, None] - right.kidx[None, :]).ravel()])
    omega = np.concatenate([(left.omega[:, None] + right.omega[None, :]).ravel(),
                            (left.omega[:, None] - right.omega[None, :]).ravel()])
    decay = np.concatenate([(left.decay[:, None] + right.decay[None, :]).ravel(),
                            (left.decay[:, None] + np.conj(right.decay)[None, :]).ravel()])
    coef = np.concatenate([sum_coef.reshape(-1, 3), diff_coef.reshape(-1, 3)])
    tags = np.concatenate([np.full(n * m, PRODUCT_II), np.full(n * m, PRODUCT_MF)])
    return ModalField(box, kidx, omega, decay, coef, "product", tags)


def modal_leray(f: ModalField) -> ModalField:
    """Exact half-plane Leray projection of every mode; buoyancy is untouched.

    A mode ``(U, W) exp(iKx - L y)`` loses the gradient of ``A exp(iKx - L y)`` with
    ``A = (L W - i K U)/(K^2 - L^2)``; the remaining wall-normal velocity is then
    removed by the harmonic gradient decaying like ``exp(-|K| y)``.
    """
    if f.size == 0:
        return f
    K = f.K
    lam = f.decay
    U, W, B = f.coef[:, 0], f.coef[:, 1], f.coef[:, 2]
    denom = K * K - lam * lam
    flat = (K == 0) & (lam == 0)
    scale = np.maximum(K * K + np.abs(lam) ** 2, 1e-300)
    singular = ~flat & (np.abs(denom) <= 1e-13 * scale)
    # A solenoidal mode decaying like exp(-|K| y) is a harmonic gradient and projects to zero.
    div = 1j * K * U - lam * W
    harmonic = singular & (np.abs(div) <= 1e-10 * (np.abs(K * U) + np.abs(lam * W)))
    if np.any(singular & ~harmonic):
        raise ArithmeticError("mode with decay equal to |K| has no particular Leray splitting")
    safe = np.where(flat | singular, 1.0, denom)
    A = np.where(flat | singular, 0.0, (lam * W - 1j * K * U) / safe)
    Up = np.where(harmonic, 0.0, U - 1j * K * A)
    Wp = np.where(flat | harmonic, 0.0, W + lam * A)
    part = f.with_coef(np.stack([Up, Wp, B], axis=-1))
    absK = np.abs(K)
    has = absK > 0
    if not np.any(has):
        return part
    Wd = Wp[has]
    Kh = K[has]
    harm_coef = np.stack([1j * Kh / absK[has] * Wd, -Wd, np.zeros_like(Wd)], axis=-1)
    harm = ModalField(f.box, f.kidx[has], f.omega[has], absK[has].astype(complex), harm_coef,
                      f.label, f.tags[has] + HARMONIC_TAG_OFFSET)
    return concat([part, harm], f.label)


def grid_convection(left: Field, right: Field) -> Field:
    """Grid advective product: spectral in ``x``, fourth-order differences in ``y``."""
    if left.grid is not right.grid and not (
            np.array_equal(left.grid.x, right.grid.x) and np.array_equal(left.grid.y, right.grid.y)):
        raise ValueError("grid mismatch between factors")
    g = left.grid
    rs = right.stack()
    out = left.u * g.ddx(rs) + left.w * g.ddy(rs)
    return Field.from_stack(g, out, left.t)


def grid_leray(f: Field) -> Field:
    """Discrete orthogonal projection onto stream-function fields vanishing at the wall.

    For each ``x``-Fourier mode the velocity ``(d_y psi, -i K psi)`` with
    ``psi(0) = 0`` closest to the input in the quadrature-weighted norm is found
    from a sparse normal-equation solve.  The summation-by-parts derivative
    makes discrete gradients orthogonal to that space up to a top-boundary
    term, so the map is a consistent Leray projection and an exact projector.
    """
    g = f.grid
    D, weights = g.sbp_pair()
    D = D.astype(complex)
    Wt = sparse.diags(weights.astype(complex))
    uh = np.fft.fft(f.u, axis=-1)
    wh = np.fft.fft(f.w, axis=-1)
    DhW = (D.conj().T @ Wt).tocsr()
    DtWD = (DhW @ D).tocsc()
    out_u = np.zeros_like(uh)
    out_w = np.zeros_like(wh)
    keep = np.arange(1, g.y.size)
    for j, K in enumerate(g.kx):
        rhs = DhW @ uh[:, j] + 1j * K * (Wt @ wh[:, j])
        normal = (DtWD + (K * K) * Wt).tocsc()
        psi = np.zeros(g.y.size, complex)
        psi[keep] = spsolve(normal[keep][:, keep], rhs[keep])
        out_u[:, j] = D @ psi
        out_w[:, j] = -1j * K * psi
    u = np.fft.ifft(out_u, axis=-1)
    w = np.fft.ifft(out_w, axis=-1)
    if np.isrealobj(f.u) and np.isrealobj(f.w):
        u, w = u.real, w.real
    return Field(g, u, w, f.b.copy(), f.t)


def grid_divergence(f: Field) -> np.ndarray:
    return f.grid.ddx(f.u) + f.grid.ddy(f.w)


def convection(left, right):
    """Projected quadratic term ``P (u d_x + w d_y) right`` for mode sums or grid fields."""
    if isinstance(left, ModalField) and isinstance(right, ModalField):
        return modal_leray(modal_convection(left, right))
    if isinstance(left, Field) and isinstance(right, Field):
        return grid_leray(grid_convection(left, right))
    raise TypeError("convection needs two ModalField or two Field arguments")


def leray_project(f):
    if isinstance(f, ModalField):
        return modal_leray(f)
    if isinstance(f, Field):
        return grid_leray(f)
    raise TypeError("leray_project needs a ModalField or a Field")


def leray_approximation(f: ModalField) -> ModalField:
    """Boundary-layer approximation of the projection: keep ``(U, 0, B)``."""
    coef = f.coef.copy()
    coef[:, 1] = 0
    return f.with_coef(coef)


@dataclass
class NonlinearCorrector:
    """Inviscid particular solution forced by ``-delta`` times an advective product."""

    field: ModalField
    min_denominator: float

    def part(self, target: str) -> ModalField:
        tag = {"MF": PRODUCT_MF, "II": PRODUCT_II}[target]
        return self.field.select(self.field.tags == tag)


def nonlinear_corrector(left: ModalField, right: ModalField, p: PhysParams, delta: float | None = None,
                        target: str | None = None, c0: float | None = None) -> NonlinearCorrector:
    """Corrector whose ``(u, b)`` part inverts ``d_t + L`` on the product forcing.

    Per product mode with frequency ``a`` the forcing ``-delta (g_u, g_b)`` (the
    boundary-layer form of the projected product) is divided by the resolvent
    ``[[-i a, -sin g], [sin g, -i a]]``; the wall-normal velocity is ``i K U / L``
    so each mode is exactly divergence free.
    """
    delta = p.delta if delta is None else delta
    prod = modal_convection(left, right)
    if target is not None:
        prod = prod.select(prod.tags == {"MF": PRODUCT_MF, "II": PRODUCT_II}[target])
    s = math.sin(p.gamma)
    c0 = 0.1 * s if c0 is None else c0
    a = prod.omega
    gap = np.minimum(np.abs(a - s), np.abs(a + s))
    min_gap = float(gap.min()) if gap.size else math.inf
    if min_gap < c0:
        raise DenominatorError(f"resolvent denominator {min_gap:.3g} is below c0={c0:.3g}")
    fu = -delta * prod.coef[:, 0]
    fb = -delta * prod.coef[:, 2]
    det = s * s - a * a
    U = (-1j * a * fu + s * fb) / det
    B = (-s * fu - 1j * a * fb) / det
    W = 1j * prod.K * U / prod.decay
    return NonlinearCorrector(prod.with_coef(np.stack([U, W, B], axis=-1), "nonlinear"), min_gap)


@dataclass
class LiftedCorrector:
    """Lifting coefficients ``c_j`` per corrector mode and the lifted mode sums."""

    c: np.ndarray
    roots: np.ndarray
    cond: np.ndarray
    slow: ModalField
    fast: ModalField

    @property
    def total(self) -> ModalField:
        return concat([self.slow, self.fast], "lifted")


def _zero_wavenumber_lift(trace, omega_vals, p):
    """Lift for ``K = 0``: two decaying roots cancel ``u`` and ``d_y b``."""
    n = trace.shape[0]
    cp = CharPolyParams(omega_vals, np.zeros(n), p.eps, p.nu0, p.kappa0, p.gamma)
    roots = roots_bruteforce(cp)
    order = np.argsort(-np.abs(roots) * (roots.real > 0), axis=-1)[:, :2]
    lam = np.take_along_axis(roots, order, axis=-1)
    lam = np.take_along_axis(lam, np.argsort(np.abs(lam), axis=-1), axis=-1)
    s = math.sin(p.gamma)
    B = s / (1j * omega_vals[:, None] + p.eps * p.kappa0 * lam * lam)
    mat = np.stack([np.ones_like(lam), -lam * B], axis=-2)
    scale = np.max(np.abs(mat), axis=-1, keepdims=True)
    cond = np.linalg.cond(mat / scale)
    if np.any(cond > LIFT_COND_LIMIT):
        raise LiftError(f"zero-wavenumber lifting condition number {cond.max():.3g}")
    rhs = -np.stack([trace[:, 0], trace[:, 2]], axis=-1) / scale[..., 0]
    c = np.linalg.solve(mat / scale, rhs[..., None])[..., 0]
    vec = np.stack([np.ones_like(lam), np.zeros_like(lam), B], axis=-1)
    full_roots = np.concatenate([np.zeros((n, 1), complex), lam], axis=1)
    full_c = np.concatenate([np.zeros((n, 1), complex), c], axis=1)
    full_vec = np.concatenate([np.zeros((n, 1, 3), complex), vec], axis=1)
    return full_c, full_roots, cond, full_vec


def lift_corrector(nonlin: ModalField, p: PhysParams) -> LiftedCorrector:
    """Decaying modes of the linear system cancelling the corrector's wall trace.

    ``slow`` collects the smallest-modulus root (the mean-flow or second-harmonic
    beam), ``fast`` the two boundary-layer roots.  At ``K = 0`` only two roots
    decay and the wall-normal velocity trace vanishes identically.
    """
    box = nonlin.box
    n = nonlin.size
    if n == 0:
        empty = ModalField.empty(box)
        return LiftedCorrector(np.zeros((0, 3), complex), np.zeros((0, 3), complex), np.zeros(0),
                               empty, empty)
    trace = nonlin.wall_trace()
    c = np.zeros((n, 3), complex)
    roots = np.zeros((n, 3), complex)
    cond = np.zeros(n)
    vec = np.zeros((n, 3, 3), complex)
    nz = nonlin.kidx != 0
    if np.any(nz):
        k = nonlin.K[nz]
        w = nonlin.omega[nz]
        cp = CharPolyParams(w, k, p.eps, p.nu0, p.kappa0, p.gamma)
        r = select_decaying(roots_bruteforce(cp), 3)
        lift = lift_boundary(trace[nz], r, k, w, p)
        c[nz], roots[nz], cond[nz] = lift.a, r, lift.cond
        vec[nz] = eigenvector_bl(k[:, None], r, w[:, None], p).as_array()[..., :3]
    if np.any(~nz):
        c0, r0, cd0, v0 = _zero_wavenumber_lift(trace[~nz], nonlin.omega[~nz], p)
        c[~nz], roots[~nz], cond[~nz], vec[~nz] = c0, r0, cd0, v0
    coef = c[..., None] * vec

    def part(cols, label):
        m = len(cols)
        sel = np.abs(coef[:, cols]).sum(axis=(1, 2)) >= 0
        return ModalField(box, np.repeat(nonlin.kidx, m), np.repeat(nonlin.omega, m),
                          roots[:, cols].ravel(), coef[:, cols].reshape(-1, 3), label,
                          np.repeat(nonlin.tags, m))
    slow = part([0], "lifted_slow")
    fast = part([1, 2], "lifted_fast")
    keep_slow = slow.decay != 0
    return LiftedCorrector(c, roots, cond, slow.select(keep_slow), fast)


@dataclass
class CorrectorSet:
    """First-order corrector split into its four parts.

    ``w1_bl13``: particular solutions of the corrected interactions;
    ``w1_bl12``: their lifts through the two boundary-layer roots;
    ``w1_mf`` / ``w1_ii``: lifts through the slow root at mean-flow /
    second-harmonic frequencies.
    """

    nonlinear: ModalField
    lifted: LiftedCorrector
    per_pair: dict = field(default_factory=dict)
    min_denominator: float = math.inf

    @property
    def w1_bl13(self) -> ModalField:
        return self.nonlinear

    @property
    def w1_bl12(self) -> ModalField:
        return self.lifted.fast

    @property
    def w1_mf(self) -> ModalField:
        slow = self.lifted.slow
        return slow.select(slow.tags == PRODUCT_MF, "w1_mf")

    @property
    def w1_ii(self) -> ModalField:
        slow = self.lifted.slow
        return slow.select(slow.tags == PRODUCT_II, "w1_ii")

    @property
    def cj(self) -> np.ndarray:
        return self.lifted.c

    @property
    def total(self) -> ModalField:
        return concat([self.nonlinear, self.lifted.total], "w1")


def assemble_w1(w0: BaseState, p: PhysParams | None = None, pairs=CORRECTED) -> CorrectorSet:
    """Correct the interactions in ``pairs`` and lift the corrector's wall trace."""
    p = w0.params if p is None else p
    pieces, per_pair = [], {}
    gap = math.inf
    for label in pairs:
        left, right = INTERACTIONS[label][:2]
        nl = nonlinear_corrector(w0.part(left), w0.part(right), p)
        gap = min(gap, nl.min_denominator)
        per_pair[label] = nl.field
        pieces.append(nl.field)
    nonlin = concat(pieces, "nonlinear")
    lifted = lift_corrector(nonlin, p)
    return CorrectorSet(nonlin, lifted, per_pair, gap)


def interaction_table(w0: BaseState, labels=tuple(INTERACTIONS)) -> dict:
    """Projected quadratic interaction fields keyed by label."""
    out = {}
    for label in labels:
        left, right = INTERACTIONS[label][:2]
        out[label] = convection(w0.part(left), w0.part(right))
    return out


def frequency_mass(f: ModalField, center: float, halfwidth: float) -> float:
    """Share of the field's energy carried by modes with ``|omega -/+ center| <= halfwidth``."""
    total = f.l2() ** 2
    if total == 0:
        return 1.0
    near = (np.abs(f.omega - center) <= halfwidth) | (np.abs(f.omega + center) <= halfwidth)
    return f.select(near).l2() ** 2 / total


# -- resonance cancellation -------------------------------------------------------

@dataclass
class ComplexModes:
    """Complex (not real-part) sum ``sum_n coef[n] exp(i K_n x - L_n y)`` of pairs ``(V1, V2)``."""

    kidx: np.ndarray
    decay: np.ndarray
    coef: np.ndarray

    @classmethod
    def from_real(cls, f: ModalField, t: float = 0.0) -> "ComplexModes":
        amp = f.coef[:, [0, 2]] * np.exp(-1j * f.omega * t)[:, None]
        return cls(np.concatenate([f.kidx, -f.kidx]), np.concatenate([f.decay, np.conj(f.decay)]),
                   np.concatenate([amp, np.conj(amp)]))

    def with_coef(self, coef) -> "ComplexModes":
        return ComplexModes(self.kidx, self.decay, coef)


def _bl_velocity(v: ComplexModes, dk: float):
    """Modes of ``(u, w)`` with ``u = V1`` and ``w = -int_0^y d_x V1``."""
    K = v.kidx * dk
    c = v.coef[:, 0]
    wc = -1j * K * c / v.decay
    kidx = np.concatenate([v.kidx, v.kidx, v.kidx])
    decay = np.concatenate([v.decay, np.zeros_like(v.decay), v.decay])
    u = np.concatenate([c, np.zeros_like(c), np.zeros_like(c)])
    w = np.concatenate([np.zeros_like(c), wc, -wc])
    return kidx, decay, u, w


def _advect(vel, target: ComplexModes, dk: float) -> ComplexModes:
    kv, lv, u, w = vel
    kt, lt = target.kidx * dk, target.decay
    factor = u[:, None] * (1j * kt)[None, :] - w[:, None] * lt[None, :]
    coef = factor[:, :, None] * target.coef[None, :, :]
    return ComplexModes((kv[:, None] + target.kidx[None, :]).ravel(),
                        (lv[:, None] + target.decay[None, :]).ravel(), coef.reshape(-1, 2))


def _mix(coef, angle):
    """Apply ``exp(angle J)`` with ``J = [[0, -1], [1, 0]]`` to ``(V1, V2)``."""
    c, s = math.cos(angle), math.sin(angle)
    return np.stack([c * coef[:, 0] - s * coef[:, 1], c * coef[:, 1] + s * coef[:, 0]], axis=-1)


PI_PLUS = 0.5 * np.array([[1, 1j], [-1j, 1]])
PI_MINUS = np.conj(PI_PLUS)


class _GramForm:
    """Exact ``L2`` form of complex mode sums sharing one ``(K, decay)`` layout.

    Modes with equal keys are merged once; the Gram matrix of each
    ``x``-wavenumber group is reused for every coefficient vector.
    """

    def __init__(self, kidx, decay, lx: float, ymax: float, decimals: int = 12):
        keys = np.stack([kidx.astype(float), np.round(decay.real, decimals),
                         np.round(decay.imag, decimals)], axis=1)
        uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        self.inverse = inverse.ravel()
        self.size = uniq.shape[0]
        self.lx = lx
        mk, ml = kidx[first], decay[first]
        self.groups = []
        for j in np.unique(mk):
            sel = np.nonzero(mk == j)[0]
            lam = ml[sel]
            self.groups.append((sel, _gram_weights(np.conj(lam)[:, None] + lam[None, :], ymax)))

    def norm(self, coef) -> float:
        merged = np.zeros((self.size,) + coef.shape[1:], complex)
        np.add.at(merged, self.inverse, coef)
        total = 0.0
        for sel, gram in self.groups:
            a = merged[sel]
            total += float(np.real(np.einsum("pc,pq,qc->", np.conj(a), gram, a)))
        return math.sqrt(max(self.lx * total, 0.0))


@dataclass(frozen=True)
class ResonanceReport:
    residual: float
    term_norms: dict
    resonant_fraction: dict
    samples: int


def resonance_cancellation_check(bl: ModalField, p: PhysParams, samples_per_period: int = 64,
                                 ymax: float | None = None) -> ResonanceReport:
    """Resonant part of the second-order filtered interaction terms.

    The filtered leading field is ``V0 = (u, b)`` of ``bl`` at ``t = 0``.  The
    first-order filtered field solves ``d_t V1 = -B(V0, V0)`` with zero mean,
    where ``B(V, W) = exp(L t) Q(exp(-L t) V, exp(-L t) W)`` and ``L = sin(g) J``.
    The four terms split ``B(V0, V1) + B(V1, V0)`` by the projector acting on the
    advecting factor.  Each is averaged over one period ``2 pi / sin(g)``.
    """
    if samples_per_period < 32:
        raise ValueError(f"need at least 32 samples per period, got {samples_per_period}")
    s = math.sin(p.gamma)
    dk = bl.box.dk
    ymax = bl.box.height if ymax is None else ymax
    v0 = ComplexModes.from_real(bl)
    period = 2 * math.pi / s
    ts = period * np.arange(samples_per_period) / samples_per_period

    def B(left: ComplexModes, right: ComplexModes, t, proj=None):
        lcoef = _mix(left.coef, -s * t)
        if proj is not None:
            lcoef = lcoef @ proj.T
        vel = _bl_velocity(left.with_coef(lcoef), dk)
        prod = _advect(vel, right.with_coef(_mix(right.coef, -s * t)), dk)
        return prod.with_coef(_mix(prod.coef, s * t))

    samples = [B(v0, v0, t) for t in ts]
    base = samples[0]
    harm = np.fft.fft(np.stack([b.coef for b in samples]), axis=0) / samples_per_period
    n = np.fft.fftfreq(samples_per_period, 1 / samples_per_period)
    nz = n != 0
    lx = bl.box.lx
    layout = {"a": (False, PI_PLUS), "b": (False, PI_MINUS), "c": (True, PI_PLUS), "d": (True, PI_MINUS)}
    sums, squares, forms = {}, {name: 0.0 for name in layout}, {}
    for t in ts:
        v1 = base.with_coef(-np.tensordot(np.exp(1j * n[nz] * s * t) / (1j * n[nz] * s), harm[nz],
                                          axes=(0, 0)))
        for name, (swap, proj) in layout.items():
            term = B(v1, v0, t, proj) if swap else B(v0, v1, t, proj)
            if name not in forms:
                forms[name] = _GramForm(term.kidx, term.decay, lx, ymax)
                sums[name] = np.zeros_like(term.coef)
                sums[name + "_layout"] = term
            squares[name] += forms[name].norm(term.coef) ** 2
            sums[name] += term.coef
    means = {name: sums[name] / samples_per_period for name in layout}
    norms = {name: forms[name].norm(means[name]) for name in layout}
    fractions = {}
    for name in layout:
        rms = math.sqrt(squares[name] / samples_per_period)
        fractions[name] = norms[name] / rms if rms > 0 else 0.0
    first, second = sums["a_layout"], sums["c_layout"]
    combined = _GramForm(np.concatenate([first.kidx, second.kidx]),
                         np.concatenate([first.decay, second.decay]), lx, ymax)
    resid = combined.norm(np.concatenate([means["a"] + means["b"], means["c"] + means["d"]]))
    biggest = max(norms.values())
    return ResonanceReport(resid / biggest if biggest > 0 else 0.0, norms, fractions, samples_per_period)
