"""Field carriers: exact exponential-mode sums and sampled grid fields.

A ``ModalField`` represents the real field ``2 Re sum_n c_n exp(-i w_n t +
i K_n (x - x0) - L_n y)`` with ``K_n = kidx_n * 2 pi / lx``, so it is periodic in
``x`` with period ``lx``.  Norms over one period and ``0 <= y <= ymax`` are
integrated in closed form.  A ``Field`` holds samples on a tensor grid whose
``y`` nodes cluster at the wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

COMPONENTS = ("u", "w", "b")


@dataclass(frozen=True)
class BeamBox:
    """Periodic cell ``[x0 - lx/2, x0 + lx/2)`` in ``x`` and the half cell ``[0, ymax]`` in ``y``."""

    lx: float
    ly: float
    x0: float = 0.0
    ymax: float | None = None

    @property
    def dk(self) -> float:
        return 2 * math.pi / self.lx

    @property
    def dm(self) -> float:
        return 2 * math.pi / self.ly

    @property
    def height(self) -> float:
        return self.ly / 2 if self.ymax is None else self.ymax

    @property
    def x_min(self) -> float:
        return self.x0 - self.lx / 2

    @property
    def x_max(self) -> float:
        return self.x0 + self.lx / 2

    @classmethod
    def for_beam(cls, eps, sigma, gamma, x0=0.0, length_factor=3.0, width_factor=6.0) -> "BeamBox":
        """Cell enclosing a beam segment of half-length ``length_factor*sigma*eps^(-1/3)``.

        The beam crosses the wall at ``x0`` along the direction ``(-cos 2g, sin 2g)``
        and has half-width ``width_factor*sigma`` across it.
        """
        half_len = length_factor * sigma * eps ** (-1 / 3)
        half_wid = width_factor * sigma
        s2, c2 = math.sin(2 * gamma), abs(math.cos(2 * gamma))
        lx = 2 * (half_len * c2 + half_wid * s2)
        ly = 2 * (half_len * s2 + half_wid * c2)
        return cls(lx, ly, x0)


def _gram_weights(s: np.ndarray, ymax: float) -> np.ndarray:
    """``int_0^ymax exp(-s y) dy`` with the removable singularity at ``s = 0``."""
    z = np.asarray(s * ymax)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    if np.any(small):
        zs = z[small]
        out[small] = 1 - zs / 2 * (1 - zs / 3 * (1 - zs / 4 * (1 - zs / 5)))
        big = ~small
        zb = z[big]
        out[big] = -np.expm1(-zb) / zb
    else:
        out = (1 - np.exp(-z)) / z
    return ymax * out


@dataclass
class ModalField:
    """Sum of modes ``coef[n] exp(-i omega[n] t + i K[n] (x - x0) - decay[n] y)``."""

    box: BeamBox
    kidx: np.ndarray
    omega: np.ndarray
    decay: np.ndarray
    coef: np.ndarray
    label: str = ""
    tags: np.ndarray | None = None

    def __post_init__(self):
        self.kidx = np.asarray(self.kidx, dtype=np.int64).ravel()
        self.omega = np.asarray(self.omega, dtype=float).ravel()
        self.decay = np.asarray(self.decay, dtype=complex).ravel()
        self.coef = np.asarray(self.coef, dtype=complex).reshape(-1, 3)
        n = self.kidx.size
        if not (self.omega.size == self.decay.size == self.coef.shape[0] == n):
            raise ValueError("mode arrays have inconsistent lengths")
        if self.tags is None:
            self.tags = np.zeros(n, dtype=np.int64)
        else:
            self.tags = np.asarray(self.tags, dtype=np.int64).ravel()

    @classmethod
    def empty(cls, box: BeamBox, label: str = "") -> "ModalField":
        return cls(box, np.zeros(0, np.int64), np.zeros(0), np.zeros(0, complex), np.zeros((0, 3), complex), label)

    @property
    def size(self) -> int:
        return self.kidx.size

    @property
    def K(self) -> np.ndarray:
        return self.kidx * self.box.dk

    def select(self, mask, label: str | None = None) -> "ModalField":
        mask = np.asarray(mask)
        return ModalField(self.box, self.kidx[mask], self.omega[mask], self.decay[mask],
                          self.coef[mask], self.label if label is None else label, self.tags[mask])

    def with_coef(self, coef, label: str | None = None) -> "ModalField":
        return ModalField(self.box, self.kidx, self.omega, self.decay, coef,
                          self.label if label is None else label, self.tags)

    def scaled(self, factor) -> "ModalField":
        return self.with_coef(self.coef * factor)

    def component(self, name: str) -> "ModalField":
        """Field with only one nonzero component (kept in its own slot)."""
        keep = np.zeros(3)
        keep[COMPONENTS.index(name)] = 1
        return self.with_coef(self.coef * keep)

    def __add__(self, other: "ModalField") -> "ModalField":
        return concat([self, other])

    def __neg__(self) -> "ModalField":
        return self.scaled(-1.0)

    def __sub__(self, other: "ModalField") -> "ModalField":
        return concat([self, -other])

    def derivative(self, axis: str) -> "ModalField":
        """Exact derivative in ``x``, ``y`` or ``t``."""
        if axis == "x":
            factor = 1j * self.K
        elif axis == "y":
            factor = -self.decay
        elif axis == "t":
            factor = -1j * self.omega
        else:
            raise ValueError(f"unknown axis {axis!r}")
        return self.with_coef(self.coef * factor[:, None])

    def laplacian(self) -> "ModalField":
        return self.with_coef(self.coef * (self.decay ** 2 - self.K ** 2)[:, None])

    def wall_trace(self) -> np.ndarray:
        """Per-mode ``(u, w, d_y b)`` at ``y = 0``."""
        return np.stack([self.coef[:, 0], self.coef[:, 1], -self.decay * self.coef[:, 2]], axis=-1)

    def grouped_trace(self, decimals: int = 12) -> np.ndarray:
        """Wall traces summed over modes sharing ``(K, omega)``; rows are groups."""
        if self.size == 0:
            return np.zeros((0, 3), complex)
        key_w = np.round(self.omega, decimals)
        keys = np.stack([self.kidx.astype(float), key_w], axis=1)
        _, inverse = np.unique(keys, axis=0, return_inverse=True)
        out = np.zeros((inverse.max() + 1, 3), complex)
        np.add.at(out, inverse.ravel(), self.wall_trace())
        return out

    def merged(self, decimals: int = 13) -> "ModalField":
        """Combine modes with identical ``(K, omega, decay)``."""
        if self.size == 0:
            return self
        keys = np.stack([self.kidx.astype(float), np.round(self.omega, decimals),
                         np.round(self.decay.real, decimals), np.round(self.decay.imag, decimals)], axis=1)
        uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        coef = np.zeros((uniq.shape[0], 3), complex)
        np.add.at(coef, inverse.ravel(), self.coef)
        return ModalField(self.box, self.kidx[first], self.omega[first], self.decay[first], coef,
                          self.label, self.tags[first])

    def phased(self, t: float) -> "ModalField":
        """Same field with the time factor at ``t`` folded into the coefficients and ``omega = 0``."""
        if t == 0.0:
            return ModalField(self.box, self.kidx, np.zeros_like(self.omega), self.decay, self.coef,
                              self.label, self.tags)
        return ModalField(self.box, self.kidx, np.zeros_like(self.omega), self.decay,
                          self.coef * np.exp(-1j * self.omega * t)[:, None], self.label, self.tags)

    def merged_layout(self, decimals: int = 12) -> "ModalField":
        """Combine modes with identical ``(K, decay)`` (frequencies are ignored)."""
        keys = np.stack([self.kidx.astype(float), np.round(self.decay.real, decimals),
                         np.round(self.decay.imag, decimals)], axis=1)
        uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        if uniq.shape[0] == self.size:
            return self
        coef = np.zeros((uniq.shape[0], 3), complex)
        np.add.at(coef, inverse.ravel(), self.coef)
        return ModalField(self.box, self.kidx[first], self.omega[first], self.decay[first], coef,
                          self.label, self.tags[first])

    def energy_by_component(self, t: float = 0.0, ymax: float | None = None, block: int = 1536) -> np.ndarray:
        """Squared L2 norms of the real components over one period and ``[0, ymax]``."""
        ymax = self.box.height if ymax is None else ymax
        if self.size == 0:
            return np.zeros(3)
        merged = self.phased(t).merged_layout()
        order = np.argsort(merged.kidx, kind="stable")
        kidx = merged.kidx[order]
        amp = merged.coef[order]
        lam = merged.decay[order]
        starts = {}
        uniq, idx, counts = np.unique(kidx, return_index=True, return_counts=True)
        for j, i0, c in zip(uniq, idx, counts):
            starts[int(j)] = (i0, i0 + c)
        total = np.zeros(3)
        for j in uniq:
            j = int(j)
            if j < 0 and -j in starts:
                continue
            parts_a = []
            parts_l = []
            i0, i1 = starts[j]
            parts_a.append(amp[i0:i1])
            parts_l.append(lam[i0:i1])
            if -j in starts and j != 0:
                k0, k1 = starts[-j]
                parts_a.append(np.conj(amp[k0:k1]))
                parts_l.append(np.conj(lam[k0:k1]))
            if j == 0:
                parts_a.append(np.conj(amp[i0:i1]))
                parts_l.append(np.conj(lam[i0:i1]))
            a = np.concatenate(parts_a)
            lam_j = np.concatenate(parts_l)
            val = np.zeros(3)
            n = a.shape[0]
            for b0 in range(0, n, block):
                lb = lam_j[b0:b0 + block]
                ab = a[b0:b0 + block]
                for c0 in range(b0, n, block):
                    lc = lam_j[c0:c0 + block]
                    ac = a[c0:c0 + block]
                    gram = _gram_weights(np.conj(lb)[:, None] + lc[None, :], ymax)
                    twice = 1.0 if c0 == b0 else 2.0
                    val += twice * np.real(np.einsum("pc,pq,qc->c", np.conj(ab), gram, ac))
            weight = 1.0 if j == 0 else 2.0
            total += weight * val
        return self.box.lx * np.maximum(total, 0.0)

    def l2(self, t: float = 0.0, ymax: float | None = None) -> float:
        """L2 norm of the real vector field over the box."""
        return float(math.sqrt(self.energy_by_component(t, ymax).sum()))

    def evaluate(self, grid: "Grid", t: float = 0.0) -> "Field":
        """Sample the real field on ``grid`` (``x`` must span one full period)."""
        nx = grid.x.size
        if self.size and 2 * np.max(np.abs(self.kidx)) >= nx:
            raise ValueError(
                f"unresolved oscillation: |K| index {np.max(np.abs(self.kidx))} needs nx > "
                f"{2 * np.max(np.abs(self.kidx))}, got {nx}")
        y = grid.y
        spec = np.zeros((3, y.size, nx), complex)
        phase = np.exp(-1j * self.omega * t)
        for j in np.unique(self.kidx):
            sel = self.kidx == j
            ey = np.exp(-np.outer(y, self.decay[sel]))
            gj = ey @ (self.coef[sel] * phase[sel, None])
            spec[:, :, int(j) % nx] += gj.T
        shift = np.exp(1j * np.fft.fftfreq(nx, 1.0 / nx) * self.box.dk * (grid.x[0] - self.box.x0))
        vals = np.fft.ifft(spec * shift, axis=-1) * nx
        real = 2 * vals.real
        return Field(grid, real[0], real[1], real[2], t)


def concat(fields, label: str = "") -> ModalField:
    fields = [f for f in fields if f is not None]
    if not fields:
        raise ValueError("nothing to concatenate")
    box = fields[0].box
    return ModalField(box,
                      np.concatenate([f.kidx for f in fields]),
                      np.concatenate([f.omega for f in fields]),
                      np.concatenate([f.decay for f in fields]),
                      np.concatenate([f.coef for f in fields]),
                      label or fields[0].label,
                      np.concatenate([f.tags for f in fields]))


def scalar_product(left: ModalField, right: ModalField, left_component: str = "u",
                   right_component: str = "u") -> ModalField:
    """Pointwise product of one real component of each field, placed in the ``u`` slot.

    ``(2 Re A)(2 Re B) = 2 Re(A B) + 2 Re(A conj(B))`` gives the sum and difference modes.
    """
    if left.box != right.box:
        raise ValueError("fields live on different cells")
    if left.size == 0 or right.size == 0:
        return ModalField.empty(left.box, "product")
    a = left.coef[:, COMPONENTS.index(left_component)]
    b = right.coef[:, COMPONENTS.index(right_component)]
    coef = np.zeros((2 * a.size * b.size, 3), complex)
    coef[:, 0] = np.concatenate([np.outer(a, b).ravel(), np.outer(a, np.conj(b)).ravel()])
    kidx = np.concatenate([np.add.outer(left.kidx, right.kidx).ravel(),
                           np.subtract.outer(left.kidx, right.kidx).ravel()])
    omega = np.concatenate([np.add.outer(left.omega, right.omega).ravel(),
                            np.subtract.outer(left.omega, right.omega).ravel()])
    decay = np.concatenate([np.add.outer(left.decay, right.decay).ravel(),
                            np.add.outer(left.decay, np.conj(right.decay)).ravel()])
    return ModalField(left.box, kidx, omega, decay, coef, "product")


def stretched_nodes(ymax: float, dmin: float, dmax: float, growth: float = 0.05,
                    count: int | None = None):
    """Wall-clustered nodes with spacing ``h(y) = 1/(1/(dmin + growth*y) + 1/dmax)``.

    Returns ``(y, h)`` where ``h`` is the exact Jacobian ``dy/ds`` of the smooth
    map from a unit-spaced index ``s``; the node count is odd for Simpson.  A
    given ``count`` keeps the shape of the map and rescales its resolution.
    """
    if dmin >= dmax:
        dmin = dmax
    def s_of(y):
        return np.log((dmin + growth * y) / dmin) / growth + y / dmax
    total = float(s_of(ymax))
    n = int(math.ceil(total)) if count is None else int(count) - 1
    if n % 2:
        n += 1
    if n < 6:
        raise ValueError("stretched grid needs at least 7 nodes")
    s = np.linspace(0.0, total, n + 1)
    y = np.minimum(s * dmax, ymax)
    for _ in range(60):
        g = s_of(y) - s
        jac = 1 / (dmin + growth * y) + 1 / dmax
        step = g / jac
        y = np.clip(y - step, 0.0, ymax)
        if np.max(np.abs(step)) < 1e-15 * ymax:
            break
    y[0], y[-1] = 0.0, ymax
    h = total / n / (1 / (dmin + growth * y) + 1 / dmax)
    return y, h


def index_derivative(n: int) -> sparse.csr_matrix:
    """Fourth-order first derivative on unit-spaced nodes, one-sided near the ends."""
    if n < 6:
        raise ValueError("need at least 6 nodes for the fourth-order stencil")
    mat = sparse.lil_matrix((n, n))
    central = np.array([1, -8, 0, 8, -1]) / 12
    for i in range(2, n - 2):
        mat[i, i - 2:i + 3] = central
    edge0 = np.array([-25, 48, -36, 16, -3]) / 12
    edge1 = np.array([-3, -10, 18, -6, 1]) / 12
    mat[0, 0:5] = edge0
    mat[1, 0:5] = edge1
    mat[n - 1, n - 5:n] = -edge0[::-1]
    mat[n - 2, n - 5:n] = -edge1[::-1]
    return mat.tocsr()


_SBP_BOUNDARY = np.array([
    [-24 / 17, 59 / 34, -4 / 17, -3 / 34, 0, 0],
    [-1 / 2, 0, 1 / 2, 0, 0, 0],
    [4 / 43, -59 / 86, 0, 59 / 86, -4 / 43, 0],
    [3 / 98, 0, -59 / 98, 0, 32 / 49, -4 / 49],
])
_SBP_NORM = np.array([17 / 48, 59 / 48, 43 / 48, 49 / 48])


def sbp_derivative(n: int) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Diagonal-norm summation-by-parts first derivative on unit-spaced nodes.

    Fourth order inside, second order in the four boundary rows.  Returns
    ``(D, h)`` with ``diag(h) D + (diag(h) D)^T = diag(-1, 0, ..., 0, 1)``.
    """
    if n < 12:
        raise ValueError("need at least 12 nodes for the summation-by-parts closure")
    mat = sparse.lil_matrix((n, n))
    central = np.array([1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])
    for i in range(4, n - 4):
        mat[i, i - 2:i + 3] = central
    for i in range(4):
        mat[i, 0:6] = _SBP_BOUNDARY[i]
        mat[n - 1 - i, n - 6:n] = -_SBP_BOUNDARY[i][::-1]
    norm = np.ones(n)
    norm[:4] = _SBP_NORM
    norm[-4:] = _SBP_NORM[::-1]
    return mat.tocsr(), norm


def simpson_weights(n: int) -> np.ndarray:
    if n % 2 == 0 or n < 3:
        raise ValueError("Simpson needs an odd node count >= 3")
    w = np.ones(n)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w / 3


@dataclass(frozen=True)
class Grid:
    """Uniform periodic ``x`` nodes and wall-clustered ``y`` nodes with quadrature data."""

    x: np.ndarray
    y: np.ndarray
    hy: np.ndarray
    lx: float

    @property
    def dx(self) -> float:
        return self.lx / self.x.size

    @property
    def y_weights(self) -> np.ndarray:
        return simpson_weights(self.y.size) * self.hy

    @property
    def kx(self) -> np.ndarray:
        """Angular wavenumbers of the ``x`` FFT bins."""
        return 2 * math.pi * np.fft.fftfreq(self.x.size, self.dx)

    def dy_matrix(self) -> sparse.csr_matrix:
        """Fourth-order first derivative in ``y`` through the smooth node map."""
        return (sparse.diags(1 / self.hy) @ index_derivative(self.y.size)).tocsr()

    def sbp_pair(self) -> tuple[sparse.csr_matrix, np.ndarray]:
        """Summation-by-parts derivative and quadrature weights through the node map."""
        D, norm = sbp_derivative(self.y.size)
        return (sparse.diags(1 / self.hy) @ D).tocsr(), norm * self.hy

    def ddx(self, arr: np.ndarray) -> np.ndarray:
        """Spectral derivative along the last (periodic ``x``) axis."""
        spec = np.fft.fft(arr, axis=-1) * (1j * self.kx)
        if self.x.size % 2 == 0:
            spec[..., self.x.size // 2] = 0
        out = np.fft.ifft(spec, axis=-1)
        return out.real if np.isrealobj(arr) else out

    def ddy(self, arr: np.ndarray) -> np.ndarray:
        """Fourth-order derivative along the ``y`` axis (second-to-last)."""
        mat = self.dy_matrix()
        flat = np.moveaxis(arr, -2, 0)
        shape = flat.shape
        out = mat @ flat.reshape(shape[0], -1)
        return np.moveaxis(out.reshape(shape), 0, -2)

    @classmethod
    def for_box(cls, box: BeamBox, dx: float, dmin: float, dmax: float, ymax: float | None = None,
                growth: float = 0.05, nx: int | None = None, ny: int | None = None) -> "Grid":
        if nx is None:
            nx = int(math.ceil(box.lx / dx))
            nx += nx % 2
        x = box.x_min + box.lx * np.arange(nx) / nx
        y, hy = stretched_nodes(box.height if ymax is None else ymax, dmin, dmax, growth, ny)
        return cls(x, y, hy, box.lx)


@dataclass
class Field:
    """Samples of ``(u, w, b)`` with shape ``(ny, nx)`` at time ``t``."""

    grid: Grid
    u: np.ndarray
    w: np.ndarray
    b: np.ndarray
    t: float = 0.0

    def stack(self) -> np.ndarray:
        return np.stack([self.u, self.w, self.b])

    @classmethod
    def from_stack(cls, grid: Grid, arr, t: float = 0.0) -> "Field":
        return cls(grid, arr[0], arr[1], arr[2], t)

    def integrate(self, density: np.ndarray) -> float:
        """Quadrature of a ``(ny, nx)`` density over the grid."""
        return float(np.sum(density.sum(axis=1) * self.grid.y_weights) * self.grid.dx)

    def l2(self, mask: np.ndarray | None = None) -> float:
        dens = np.abs(self.u) ** 2 + np.abs(self.w) ** 2 + np.abs(self.b) ** 2
        if mask is not None:
            dens = dens * mask
        return math.sqrt(max(self.integrate(dens), 0.0))

    def linf(self) -> float:
        return float(max(np.max(np.abs(self.u)), np.max(np.abs(self.w)), np.max(np.abs(self.b))))

    def __add__(self, other: "Field") -> "Field":
        return Field.from_stack(self.grid, self.stack() + other.stack(), self.t)

    def __sub__(self, other: "Field") -> "Field":
        return Field.from_stack(self.grid, self.stack() - other.stack(), self.t)
