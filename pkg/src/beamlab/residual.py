"""The full operator applied to assembled fields, consistency residuals and slope fits.

Mode sums are handled exactly: time and space derivatives multiply amplitudes
and the Leray projection acts per mode.  Sampled fields use spectral
derivatives in ``x`` and fourth-order differences in ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .beams import BaseState, build_w0, wall_grid
from .correctors import (CorrectorSet, assemble_w1, grid_convection, grid_leray, modal_convection,
                         modal_leray)
from .dispersion import PhysParams
from .fields import Field, Grid, ModalField, concat

MIN_SWEEP_POINTS = 5
MIN_SWEEP_DECADES = 1.5


def _modal_linear(f: ModalField, p: PhysParams) -> ModalField:
    """Unprojected ``d_t W + L W`` of a mode sum, pressure excluded."""
    s, c = math.sin(p.gamma), math.cos(p.gamma)
    lap = f.decay ** 2 - f.K ** 2
    U, W, B = f.coef[:, 0], f.coef[:, 1], f.coef[:, 2]
    dt = -1j * f.omega
    ru = (dt - p.eps * p.nu0 * lap) * U - s * B
    rw = (dt - p.eps * p.nu0 * lap) * W - c * B
    rb = (dt - p.eps * p.kappa0 * lap) * B + s * U + c * W
    return f.with_coef(np.stack([ru, rw, rb], axis=-1), "residual")


def _grid_linear(f: Field, dt_field: Field, p: PhysParams) -> Field:
    g = f.grid
    s, c = math.sin(p.gamma), math.cos(p.gamma)

    def lap(a):
        return g.ddx(g.ddx(a)) + g.ddy(g.ddy(a))

    ru = dt_field.u - s * f.b - p.eps * p.nu0 * lap(f.u)
    rw = dt_field.w - c * f.b - p.eps * p.nu0 * lap(f.w)
    rb = dt_field.b + s * f.u + c * f.w - p.eps * p.kappa0 * lap(f.b)
    return Field(g, ru, rw, rb, f.t)


def _same_grid(a: Grid, b: Grid) -> bool:
    return a is b or (a.x.shape == b.x.shape and a.y.shape == b.y.shape
                      and np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y))


def apply_operator(field_in, p: PhysParams, include_nonlinear: bool = True,
                   dt_field: Field | None = None, delta: float | None = None):
    """``d_t W + L_eps W + delta Q(W, W)`` with the Leray projection applied.

    A ``ModalField`` is processed exactly and needs no ``dt_field``.  A grid
    ``Field`` requires ``dt_field`` on the same grid.
    """
    delta = p.delta if delta is None else delta
    if isinstance(field_in, ModalField):
        out = _modal_linear(field_in, p)
        if include_nonlinear and delta != 0:
            out = concat([out, modal_convection(field_in, field_in).scaled(delta)], "residual")
        return modal_leray(out)
    if not isinstance(field_in, Field):
        raise TypeError("apply_operator needs a ModalField or a Field")
    if dt_field is None:
        raise ValueError("a grid field needs its analytic time derivative dt_field")
    if not _same_grid(field_in.grid, dt_field.grid):
        raise ValueError("dt_field lives on a different grid")
    out = _grid_linear(field_in, dt_field, p)
    if include_nonlinear and delta != 0:
        q = grid_convection(field_in, field_in)
        out = Field(out.grid, out.u + delta * q.u, out.w + delta * q.w, out.b + delta * q.b, out.t)
    return grid_leray(out)


def modal_evaluate_with_dt(f: ModalField, grid: Grid, t: float = 0.0) -> tuple[Field, Field]:
    """Sample a mode sum and its exact time derivative on ``grid``."""
    return f.evaluate(grid, t), f.derivative("t").evaluate(grid, t)


@dataclass
class ResidualParts:
    """Residual mode sums (or grid fields) and their ``L2`` norms."""

    residual: object
    l2: float
    t: float = 0.0


def residual_w0(w0: BaseState, t: float = 0.0) -> ResidualParts:
    """Linear residual of the leading-order field."""
    r = apply_operator(w0.total, w0.params, include_nonlinear=False)
    return ResidualParts(r, r.l2(t), t)


def residual_w1(w0: BaseState, w1: CorrectorSet | None = None, t: float = 0.0,
                delta: float | None = None) -> ResidualParts:
    """``(d_t + L) W1 + delta P Q(W0, W0)``: what the first corrector leaves over."""
    p = w0.params
    delta = p.delta if delta is None else delta
    w1 = assemble_w1(w0) if w1 is None else w1
    lin = _modal_linear(w1.total, p)
    base = w0.total
    forcing = modal_convection(base, base).scaled(delta)
    r = modal_leray(concat([lin, forcing], "r1"))
    return ResidualParts(r, r.l2(t), t)


def residual_wapp(w0: BaseState, w1: CorrectorSet | None = None, grid: Grid | None = None,
                  t: float = 0.0) -> ResidualParts:
    """Full residual of ``W0 + W1`` sampled on a wall grid.

    The exact modal parts ``r0 + r1`` are sampled and the interactions involving
    ``W1`` are formed on the grid.
    """
    p = w0.params
    w1 = assemble_w1(w0) if w1 is None else w1
    grid = wall_grid(w0.box, p) if grid is None else grid
    r01 = concat([residual_w0(w0).residual, residual_w1(w0, w1).residual], "r01")
    base = w0.total.evaluate(grid, t)
    corr = w1.total.evaluate(grid, t)
    q = grid_convection(base, corr) + grid_convection(corr, base) + grid_convection(corr, corr)
    q = grid_leray(Field(grid, p.delta * q.u, p.delta * q.w, p.delta * q.b, t))
    r = r01.evaluate(grid, t) + q
    return ResidualParts(r, r.l2(), t)


def wall_residual(f: ModalField) -> float:
    """Largest wall trace ``(u, w, d_y b)`` summed per wavenumber and frequency, relative."""
    grouped = f.grouped_trace()
    scale = float(np.max(np.abs(f.coef))) if f.size else 1.0
    return float(np.max(np.abs(grouped))) / scale if grouped.size else 0.0


# -- sweep regression -------------------------------------------------------------

@dataclass
class ScalingReport:
    """Fitted log-log slope of one quantity against one sweep variable."""

    quantity: str
    variable: str
    fitted_slope: float
    ci95: float
    predicted_slope: float
    tolerance: float
    params: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    decades: float = 0.0

    @property
    def passed(self) -> bool:
        return abs(self.fitted_slope - self.predicted_slope) <= self.tolerance

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag} {self.quantity} vs {self.variable}: slope {self.fitted_slope:.4f} "
                f"+/- {self.ci95:.3g} (predicted {self.predicted_slope:.4f} +/- {self.tolerance})")


def fit_slope(params, values, quantity: str = "q", variable: str = "eps", predicted: float = 0.0,
              tolerance: float = 0.15, strict: bool = True) -> ScalingReport:
    """Ordinary least squares of ``log values`` on ``log params``.

    ``strict`` enforces at least five points over at least 1.5 decades.
    """
    x = np.asarray(params, float)
    y = np.asarray(values, float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("params and values must be matching 1-d sequences")
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise ValueError(f"{quantity}: non-positive or non-finite values cannot be fitted in log scale")
    if np.any(x <= 0):
        raise ValueError(f"{variable}: sweep parameters must be positive")
    decades = float(np.log10(x.max() / x.min()))
    if strict and (x.size < MIN_SWEEP_POINTS or decades < MIN_SWEEP_DECADES - 1e-9):
        raise ValueError(f"sweep needs >= {MIN_SWEEP_POINTS} points over >= {MIN_SWEEP_DECADES}"
                         f" decades (got {x.size} over {decades:.2f})")
    if x.size < 2:
        raise ValueError("at least two sweep points are required")
    fit = stats.linregress(np.log(x), np.log(y))
    dof = x.size - 2
    ci = float(stats.t.ppf(0.975, dof) * fit.stderr) if dof > 0 else math.inf
    return ScalingReport(quantity, variable, float(fit.slope), ci, predicted, tolerance, x, y, decades)


def sweep_fit(evaluator: Callable[[float], float], sweep_values: Sequence[float], quantity: str = "q",
              variable: str = "eps", predicted: float = 0.0, tolerance: float = 0.15,
              strict: bool = True) -> ScalingReport:
    """Evaluate ``evaluator`` at each sweep value and fit the log-log slope."""
    xs = np.asarray(sweep_values, float)
    ys = np.array([float(evaluator(float(v))) for v in xs])
    return fit_slope(xs, ys, quantity, variable, predicted, tolerance, strict)


def geometric_sweep(lo: float, hi: float, points: int) -> np.ndarray:
    return np.geomspace(lo, hi, points)


# Predicted exponents of each residual: (eps, sigma, delta).
PREDICTED = {
    "w0": (1.0, -2.0, 0.0),
    "w1": (1 / 6, -2.0, 1.0),
    "wapp": (1 / 6, -2.0, 1.0),
}


def sweep_params(eps: float, sigma: float, delta: float | None = None, gamma: float | None = None,
                 strict: bool = False) -> PhysParams:
    """Parameters for a sweep point; ``delta`` defaults to the critical size."""
    from .beams import DEFAULT_GAMMA
    gamma = DEFAULT_GAMMA if gamma is None else gamma
    delta = math.sqrt(eps) * sigma ** (2 / 3) if delta is None else delta
    return PhysParams(eps, sigma, gamma, delta=delta, strict=strict)


def residual_norm(target: str, p: PhysParams) -> float:
    """``L2`` norm of the residual ``target`` in {w0, w1, wapp} at ``p``."""
    w0 = build_w0(p)
    if target == "w0":
        return residual_w0(w0).l2
    if target == "w1":
        return residual_w1(w0).l2
    if target == "wapp":
        return residual_wapp(w0).l2
    raise ValueError(f"unknown residual target {target!r}")
