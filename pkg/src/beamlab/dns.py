"""Direct simulation of the viscous Boussinesq system in a periodic half-strip.

Velocities are discrete stream-function fields ``(d_y psi, -d_x psi)`` with
``psi = d_y psi = 0`` at the wall, so incompressibility and no-slip hold
exactly.  The momentum equation is solved in Galerkin form on that space
(which is the discrete Leray projection), with the summation-by-parts
``y`` derivative and its quadrature norm.  Diffusion and the top sponge are Crank-Nicolson; the
buoyancy coupling and advection are second-order Adams-Bashforth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .beams import BaseState, build_w0
from .correctors import CorrectorSet, assemble_w1
from .dispersion import PhysParams
from .fields import Field, Grid, ModalField, concat

SPONGE_FRACTION = 0.15
ENERGY_SLACK = 1e-4
# The beam must be compact below the open top of the strip.
DNS_LENGTH_FACTOR = 5.0
DNS_WIDTH_FACTOR = 10.0


class CFLError(ValueError):
    """The time step violates the advective or coupling stability limit."""


class NumericalInstability(FloatingPointError):
    """The solution developed non-finite values."""


def wall_constraint_basis(D: sparse.csr_matrix) -> sparse.csr_matrix:
    """Basis of ``{psi : psi_0 = 0, (D psi)_0 = 0}`` parametrized by ``psi[2:]``."""
    n = D.shape[0]
    row = D[0].toarray().ravel()
    if row[1] == 0:
        raise ValueError("derivative stencil does not couple the first interior node")
    rows, cols, vals = [], [], []
    for j in range(2, n):
        if row[j] != 0:
            rows.append(1)
            cols.append(j - 2)
            vals.append(-row[j] / row[1])
        rows.append(j)
        cols.append(j - 2)
        vals.append(1.0)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n - 2))


def sponge_profile(y: np.ndarray, ymax: float, fraction: float = SPONGE_FRACTION,
                   rate: float = 5.0) -> np.ndarray:
    """Damping rate rising smoothly from zero over the top ``fraction`` of the strip."""
    start = ymax * (1 - fraction)
    s = np.clip((y - start) / (ymax - start), 0.0, 1.0)
    return rate * np.sin(0.5 * math.pi * s) ** 2


@dataclass
class EnergyRecord:
    t: float
    energy: float
    dissipation: float


@dataclass
class SolverState:
    """Spectral unknowns at time ``t`` and the energy history."""

    t: float
    dt: float
    phi: np.ndarray
    bhat: np.ndarray
    forcing_prev: np.ndarray | None = None
    dissipation: float = 0.0
    history: list = field(default_factory=list)
    deviation: list = field(default_factory=list)


class BoussinesqSolver:
    """Fixed-step IMEX integrator on a wall grid with a sponge below ``y = ymax``."""

    def __init__(self, grid: Grid, p: PhysParams, dt: float, delta: float | None = None,
                 sponge_fraction: float = SPONGE_FRACTION, sponge_rate: float = 5.0,
                 coupling_limit: float = 0.5):
        if dt <= 0:
            raise ValueError("time step must be positive")
        if dt > coupling_limit:
            raise CFLError(f"dt={dt} exceeds the explicit coupling limit {coupling_limit}")
        self.grid, self.p, self.dt = grid, p, dt
        self.delta = p.delta if delta is None else delta
        nx, ny = grid.x.size, grid.y.size
        self.nx, self.ny = nx, ny
        nk = nx // 2 + 1
        self.kvals = 2 * math.pi * np.arange(nk) / grid.lx
        self.active = np.ones(nk, bool)
        if nx % 2 == 0:
            self.active[-1] = False
        self.parseval = np.where((np.arange(nk) == 0) | ~self.active, 1.0, 2.0) * grid.dx / nx
        self.sponge = sponge_profile(grid.y, grid.y[-1], sponge_fraction, sponge_rate)
        self.Dreal, w = grid.sbp_pair()
        D = self.Dreal.astype(complex)
        self.D = D
        self.Z = wall_constraint_basis(D).astype(complex)
        self.weights = w
        self.W = sparse.diags(w.astype(complex))
        WR = sparse.diags((w * self.sponge).astype(complex))
        Dh = D.conj().T
        DtWD = Dh @ self.W @ D
        DtWRD = Dh @ WR @ D
        D2 = D @ D
        D2tWD2 = D2.conj().T @ self.W @ D2
        Zh = self.Z.conj().T
        nu, kap = p.eps * p.nu0, p.eps * p.kappa0
        blocks = {name: [] for name in ("M", "A", "Ab", "lhs", "rhs", "lhs_b", "rhs_b")}
        for K in self.kvals:
            M = Zh @ (DtWD + K * K * self.W) @ self.Z
            A = Zh @ (D2tWD2 + 2 * K * K * DtWD + K ** 4 * self.W) @ self.Z
            S = Zh @ (DtWRD + K * K * WR) @ self.Z
            Ab = DtWD + K * K * self.W
            implicit = nu * A + S
            implicit_b = kap * Ab + WR
            blocks["M"].append(M)
            blocks["A"].append(A)
            blocks["Ab"].append(Ab)
            blocks["lhs"].append(M + 0.5 * dt * implicit)
            blocks["rhs"].append(M - 0.5 * dt * implicit)
            blocks["lhs_b"].append(self.W + 0.5 * dt * implicit_b)
            blocks["rhs_b"].append(self.W - 0.5 * dt * implicit_b)
        self.M = sparse.block_diag(blocks["M"], format="csr")
        self.A = sparse.block_diag(blocks["A"], format="csr")
        self.Ab = sparse.block_diag(blocks["Ab"], format="csr")
        self.Wb = sparse.block_diag([self.W] * nk, format="csr")
        self.rhs = sparse.block_diag(blocks["rhs"], format="csr")
        self.rhs_b = sparse.block_diag(blocks["rhs_b"], format="csr")
        self.lu = splu(sparse.block_diag(blocks["lhs"], format="csc"))
        self.lu_b = splu(sparse.block_diag(blocks["lhs_b"], format="csc"))
        self.mass_lu = splu(self.M.tocsc())
        self.nk = nk

    # -- transforms --------------------------------------------------------------

    def _flat(self, arr):
        return arr.T.reshape(-1)

    def _unflat(self, vec, n):
        return vec.reshape(self.nk, n).T

    def _mask(self, spec: np.ndarray) -> np.ndarray:
        spec = spec.copy()
        spec[:, ~self.active] = 0
        return spec

    def velocity_hat(self, phi: np.ndarray):
        psi = self.Z @ self._unflat(phi, self.ny - 2)
        return self.D @ psi, -1j * self.kvals[None, :] * psi

    def to_field(self, state: SolverState) -> Field:
        uh, wh = self.velocity_hat(state.phi)
        bh = self._unflat(state.bhat, self.ny)
        g = self.grid
        u, w, b = (np.fft.irfft(self._mask(a), n=self.nx, axis=-1) for a in (uh, wh, bh))
        return Field(g, u, w, b, state.t)

    def _load(self, uh, wh):
        """Galerkin load ``Z^H (D^H W u + i K W w)`` per wavenumber, flattened."""
        loads = self.Z.conj().T @ (self.D.conj().T @ (self.W @ uh) + 1j * self.kvals[None, :] * (self.W @ wh))
        return self._flat(loads)

    def project(self, f: Field, t: float | None = None) -> SolverState:
        """Nearest discrete field with exact incompressibility and wall conditions."""
        uh, wh, bh = (self._mask(np.fft.rfft(a, axis=-1)) for a in (f.u, f.w, f.b))
        phi = self.mass_lu.solve(self._load(uh, wh))
        return SolverState(f.t if t is None else t, self.dt, phi, self._flat(bh))

    # -- energy ------------------------------------------------------------------

    def _weighted(self, quad, vec, n):
        per_k = np.real(np.sum(np.conj(self._unflat(vec, n)) * self._unflat(quad @ vec, n), axis=0))
        return float(np.sum(per_k * self.parseval))

    def energy(self, state: SolverState) -> float:
        return self._weighted(self.M, state.phi, self.ny - 2) + self._weighted(self.Wb, state.bhat, self.ny)

    def dissipation_rate(self, phi, bhat) -> float:
        """``2 eps (nu0 |grad(u, w)|^2 + kappa0 |grad b|^2)`` for the given unknowns."""
        p = self.p
        return 2 * p.eps * (p.nu0 * self._weighted(self.A, phi, self.ny - 2)
                            + p.kappa0 * self._weighted(self.Ab, bhat, self.ny))

    # -- stepping ----------------------------------------------------------------

    def explicit_forcing(self, state: SolverState) -> tuple[np.ndarray, np.ndarray, float]:
        """Buoyancy coupling and advection as Galerkin loads; also the peak speed."""
        f = self.to_field(state)
        g = self.grid
        s, c = math.sin(self.p.gamma), math.cos(self.p.gamma)
        fu, fw, fb = s * f.b, c * f.b, -s * f.u - c * f.w
        speed = float(np.max(np.hypot(f.u, f.w)))
        if self.delta != 0:
            arr = f.stack()
            dy = np.stack([self.Dreal @ a for a in arr])
            adv = f.u * g.ddx(arr) + f.w * dy
            fu, fw, fb = fu - self.delta * adv[0], fw - self.delta * adv[1], fb - self.delta * adv[2]
        uh, wh, bh = (self._mask(np.fft.rfft(a, axis=-1)) for a in (fu, fw, fb))
        return self._load(uh, wh), self._flat(self.W @ bh), speed

    def check_cfl(self, speed: float):
        g = self.grid
        hmin = min(g.dx, float(np.min(np.diff(g.y))))
        if speed > 0 and self.dt > 0.5 * hmin / speed:
            raise CFLError(f"dt={self.dt} exceeds 0.5*h/|v| = {0.5 * hmin / speed:.4g}")

    def step(self, state: SolverState) -> SolverState:
        load_v, load_b, speed = self.explicit_forcing(state)
        self.check_cfl(speed)
        load = np.concatenate([load_v, load_b])
        nv = load_v.size

        def advance(ext):
            return (self.lu.solve(self.rhs @ state.phi + self.dt * ext[:nv]),
                    self.lu_b.solve(self.rhs_b @ state.bhat + self.dt * ext[nv:]))
        if state.forcing_prev is None:
            # Heun start keeps the first step second order.
            phi, bhat = advance(load)
            pv, pb, _ = self.explicit_forcing(SolverState(state.t + self.dt, self.dt, phi, bhat))
            ext = 0.5 * (load + np.concatenate([pv, pb]))
        else:
            ext = 1.5 * load - 0.5 * state.forcing_prev
        phi, bhat = advance(ext)
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(bhat))):
            raise NumericalInstability(
                f"non-finite solution at t={state.t + self.dt:.6g} (peak speed {speed:.3g}, dt={self.dt})")
        mid_phi, mid_b = 0.5 * (phi + state.phi), 0.5 * (bhat + state.bhat)
        diss = state.dissipation + self.dt * self.dissipation_rate(mid_phi, mid_b)
        new = SolverState(state.t + self.dt, self.dt, phi, bhat, load, diss, state.history,
                          state.deviation)
        new.history.append(EnergyRecord(new.t, self.energy(new), diss))
        return new

    def start(self, f: Field) -> SolverState:
        state = self.project(f)
        state.history.append(EnergyRecord(state.t, self.energy(state), 0.0))
        return state


def step(state: SolverState, solver: BoussinesqSolver) -> SolverState:
    return solver.step(state)


def energy_inequality_margin(history) -> float:
    """Largest ``(E(t) + dissipation(t)) / E(0) - 1`` over the history."""
    e0 = history[0].energy
    if e0 == 0:
        return max(h.energy + h.dissipation for h in history)
    return max((h.energy + h.dissipation) / e0 - 1 for h in history)


# -- comparison with the approximate solution ----------------------------------------

def stability_bound_shape(p: PhysParams, t, delta: float | None = None):
    """``delta eps^(5/6) sigma^(-10/3) exp(delta eps^(-1/2) sigma^(-2/3) t)``."""
    delta = p.delta if delta is None else delta
    rate = delta * p.eps ** -0.5 * p.sigma ** (-2 / 3)
    return delta * p.eps ** (5 / 6) * p.sigma ** (-10 / 3) * np.exp(rate * np.asarray(t, float))


def log_time_horizon(p: PhysParams) -> float:
    """``log(eps^(-4/3) sigma^(8/3))``; admissible horizons are a vanishing fraction of it."""
    return math.log(p.eps ** (-4 / 3) * p.sigma ** (8 / 3))


@dataclass
class DNSGrid:
    nx: int | None = None
    ny: int | None = None
    points_per_sigma: float = 8.0
    dmin: float | None = None
    growth: float = 0.08


def dns_grid(box, p: PhysParams, spec: DNSGrid = DNSGrid(), sponge_fraction: float = SPONGE_FRACTION) -> Grid:
    """Strip whose sponge starts at the top of the beam cell."""
    ymax = box.height / (1 - sponge_fraction)
    h = p.sigma / spec.points_per_sigma
    dmin = p.eps ** 0.5 / 8 if spec.dmin is None else spec.dmin
    return Grid.for_box(box, h, dmin, h, ymax, spec.growth, spec.nx, spec.ny)


@dataclass
class StabilityResult:
    """Samples of energy and deviation with the calibrated bound curve."""

    t: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    deviation_sq: np.ndarray
    bound: np.ndarray
    calibration: float
    energy_margin: float
    sample_t: np.ndarray = field(default=None)

    @property
    def below_bound(self) -> bool:
        return bool(np.all(self.deviation_sq <= self.bound * (1 + 1e-12)))

    @property
    def final_deviation(self) -> float:
        return float(math.sqrt(self.deviation_sq[-1]))


def approximate_solution(w0: BaseState, corrector: CorrectorSet | None = None,
                         include_corrector: bool = True) -> ModalField:
    if not include_corrector or w0.params.delta == 0:
        return w0.total
    corrector = assemble_w1(w0) if corrector is None else corrector
    return concat([w0.total, corrector.total], "wapp")


def stability_compare(p: PhysParams, horizon: float = 1.0, dt: float = 5e-3,
                      grid_spec: DNSGrid = DNSGrid(), calibrate_at: float = 0.1,
                      samples: int = 20, include_corrector: bool = True,
                      w0: BaseState | None = None, length_factor: float = DNS_LENGTH_FACTOR,
                      width_factor: float = DNS_WIDTH_FACTOR) -> StabilityResult:
    """Run from ``W(0) = W_app(0)`` and track ``|W_app(t) - W(t)|^2`` outside the sponge.

    Both fields are compared after the same discrete projection so the deviation
    vanishes at ``t = 0``.  The bound's constant is fitted at ``calibrate_at``.
    """
    w0 = build_w0(p, length_factor=length_factor, width_factor=width_factor) if w0 is None else w0
    wapp = approximate_solution(w0, include_corrector=include_corrector)
    grid = dns_grid(w0.box, p, grid_spec)
    solver = BoussinesqSolver(grid, p, dt)
    state = solver.start(wapp.evaluate(grid, 0.0))
    steps = int(round(horizon / dt))
    if abs(steps * dt - horizon) > 1e-9 * max(horizon, 1.0):
        raise ValueError("horizon must be a whole number of time steps")
    every = max(1, steps // samples)
    inside = grid.y <= grid.y[-1] * (1 - SPONGE_FRACTION) + 1e-12
    mask = np.broadcast_to(inside[:, None], (grid.y.size, grid.x.size)).astype(float)

    def deviation(st):
        ref = solver.to_field(solver.project(wapp.evaluate(grid, st.t)))
        return (ref - solver.to_field(st)).l2(mask) ** 2

    ts, devs = [0.0], [0.0]
    calib_step = int(round(calibrate_at / dt))
    for n in range(1, steps + 1):
        state = solver.step(state)
        if n % every == 0 or n == steps or n == calib_step:
            ts.append(state.t)
            devs.append(deviation(state))
    ts = np.array(ts)
    devs = np.array(devs)
    order = np.argsort(ts)
    ts, devs = ts[order], devs[order]
    calib = int(np.argmin(np.abs(ts - calibrate_at)))
    shape = stability_bound_shape(p, ts)
    c_hat = devs[calib] / shape[calib] if shape[calib] > 0 else 0.0
    hist = state.history
    ht = np.array([h.t for h in hist])
    energy = np.interp(ts, ht, [h.energy for h in hist])
    diss = np.interp(ts, ht, [h.dissipation for h in hist])
    return StabilityResult(ts, energy, diss, devs, c_hat * shape, c_hat, energy_inequality_margin(hist))
