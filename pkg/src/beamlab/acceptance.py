"""The acceptance suite: eleven quantitative checks, each timed against its budget.

Every ``criterion_N`` returns a ``CriterionResult`` whose ``line()`` is a single
PASS/FAIL line; ``details`` lists the individual measurements behind it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .beams import (DEFAULT_GAMMA, BeamSpec, SpectralAmplitude, build_w0, cone_energy_fraction,
                    wall_grid)
from .boundary_layer import interior_trace, lift_boundary
from .charpoly import (CertificationRejected, CharPolyParams, RegimeError, asym_roots_critical,
                       asym_roots_meanflow, asym_roots_secondharmonic, check_critical_detuning,
                       count_decaying, critical_ell, newton_localize, polynomial_roots, roots_bruteforce)
from .correctors import INTERACTIONS, assemble_w1, interaction_table, resonance_cancellation_check
from .dispersion import PhysParams, Wavevector, incident_branch
from .dns import stability_compare
from .fields import concat, scalar_product
from .residual import fit_slope, residual_w0, residual_w1, sweep_params, wall_residual


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    runtime: float
    budget: float
    details: list = field(default_factory=list)

    @property
    def within_budget(self) -> bool:
        return self.runtime <= self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget

    def line(self) -> str:
        flag = "PASS" if self.ok else "FAIL"
        return (f"{flag} criterion {self.number:2d} {self.name}: {self.runtime:.1f}s "
                f"(budget {self.budget:.0f}s)")


def _timed(number: int, name: str, budget: float, body: Callable[[list], bool]) -> CriterionResult:
    details: list = []
    start = time.perf_counter()
    passed = bool(body(details))
    return CriterionResult(number, name, passed, time.perf_counter() - start, budget, details)


def _report(details: list, report) -> bool:
    details.append(report.line())
    return report.passed


# -- 1: root certification ----------------------------------------------------------

def draw_regime_case(regime: str, rng, eps: float | None = None, gamma: float | None = None,
                     kmod: float | None = None, theta: float | None = None,
                     nu0: float = 1.0, kappa0: float = 1.0):
    """Admissible ``(omega, k)`` in ``regime``; returns the parameters, ``|k|``, ``theta`` and a certifier.

    Unset values are drawn: ``eps`` log-uniform in ``[1e-6, 1e-3]``, ``gamma`` uniform in
    ``[0.1, 1.4]`` and ``|k|`` up to ``1/sigma`` with ``sigma = eps^0.1``.  A fixed ``theta``
    sets ``omega = sin(theta)``, or twice that for the second harmonic.
    """
    eps = 10 ** rng.uniform(-6, -3) if eps is None else eps
    gamma = rng.uniform(0.1, 1.4) if gamma is None else gamma
    s = math.sin(gamma)
    kmod = rng.uniform(0.1, eps ** -0.1) if kmod is None else kmod
    if regime == "critical":
        if theta is None:
            w = s + rng.choice([-1, 1]) * rng.uniform(0.5, 2) * eps ** (1 / 3)
            theta = math.asin(min(w, 1.0))
        p = CharPolyParams(math.sin(theta), kmod * math.sin(theta + gamma), eps, nu0, kappa0, gamma)

        def solve():
            # The |k| floor is not enforced: certification is judged after refinement.
            check_critical_detuning(p)
            return asym_roots_critical(p, kmod, theta, check=False)
        return p, kmod, theta, solve
    k = kmod * rng.choice([-1, 1])
    if regime == "meanflow":
        if theta is None:
            w = rng.choice([-1, 1]) * rng.uniform(0.5, 2) * eps ** (1 / 3)
        else:
            w = math.sin(theta)
        p = CharPolyParams(w, k, eps, nu0, kappa0, gamma)
        return p, kmod, math.asin(w), lambda: asym_roots_meanflow(p, check=True)
    if regime == "secondharmonic":
        if theta is None:
            w = 2 * s + rng.uniform(-2, 2) * eps ** (1 / 3)
        else:
            w = 2 * math.sin(theta)
        p = CharPolyParams(w * math.copysign(1.0, k), k, eps, nu0, kappa0, gamma)
        return p, kmod, math.asin(min(w / 2, 1.0)), lambda: asym_roots_secondharmonic(p, check=True)
    raise ValueError(f"unknown regime {regime!r}")


REGIMES = ("critical", "meanflow", "secondharmonic")


def certify_draws(regime: str, count: int, rng) -> dict:
    """Certify ``count`` admissible draws and tally the three required properties."""
    tally = {"draws": 0, "rejected_draws": 0, "not_three": 0, "uncertified": 0, "disk_mismatch": 0,
             "raw_seed_certified": 0}
    while tally["draws"] < count:
        p, _, _, solve = draw_regime_case(regime, rng)
        try:
            triple = solve()
        except RegimeError:
            tally["rejected_draws"] += 1
            continue
        tally["draws"] += 1
        oracle = roots_bruteforce(p)
        if count_decaying(oracle) != 3:
            tally["not_three"] += 1
        tally["raw_seed_certified"] += int(np.count_nonzero(triple.seed_certified))
        if not triple.certified:
            tally["uncertified"] += 1
        inside = np.abs(oracle[None, :] - triple.lambdas[:, None]) <= triple.radii[:, None]
        if np.any(inside.sum(axis=1) != 1):
            tally["disk_mismatch"] += 1
    return tally


def criterion_1(seed: int = 1, draws: int = 200) -> CriterionResult:
    def body(details):
        rng = np.random.default_rng(seed)
        ok = True
        for name in REGIMES:
            tally = certify_draws(name, draws, rng)
            good = tally["not_three"] == tally["uncertified"] == tally["disk_mismatch"] == 0
            details.append(f"{'PASS' if good else 'FAIL'} {name}: {tally}")
            ok &= good
        return ok
    return _timed(1, "root certification", 30, body)


# -- 2: critical-root convergence ------------------------------------------------------

def fast_root_gap(eps: float, kmod: float = 1.0, gamma: float = DEFAULT_GAMMA, detuning: float = 1.0) -> float:
    """``|lambda_3 eps^(1/2) / ell_3 - 1|`` at ``omega = sin(gamma) + detuning eps^(1/3)``."""
    w = math.sin(gamma) + detuning * eps ** (1 / 3)
    theta = math.asin(w)
    p = CharPolyParams(w, kmod * math.sin(theta + gamma), eps, 1.0, 1.0, gamma)
    triple = asym_roots_critical(p, kmod, theta, check=False)
    return abs(triple.lambda3 * math.sqrt(eps) / critical_ell(p)[2] - 1)


def criterion_2() -> CriterionResult:
    def body(details):
        eps = np.geomspace(1e-7, 1e-3, 9)
        gaps = [fast_root_gap(e) for e in eps]
        return _report(details, fit_slope(eps, gaps, "fast root gap", "eps", 1 / 6, 0.1))
    return _timed(2, "critical-root convergence", 10, body)


# -- 3: boundary lifting ---------------------------------------------------------------

def lift_amplitudes(eps: float, kmod: float, gamma: float = DEFAULT_GAMMA, detuning: float = 1.0) -> np.ndarray:
    """``|a_1|, |a_2|, |a_3|`` lifting a unit incident wave at ``omega = sin(gamma) + detuning eps^(1/3)``."""
    w = math.sin(gamma) + detuning * eps ** (1 / 3)
    theta = math.asin(w)
    kv = Wavevector.from_polar(kmod, theta, gamma)
    wv = incident_branch(kv, gamma)
    p = CharPolyParams(wv, kv.k, eps, 1.0, 1.0, gamma)
    triple = asym_roots_critical(p, kmod, theta, check=False)
    lift = lift_boundary(interior_trace(kv, wv, gamma), triple, kv.k, wv, p)
    return np.abs(lift.a)


def criterion_3() -> CriterionResult:
    def body(details):
        ok = True
        for eps in (1e-3, 1e-4):
            p = PhysParams(eps, eps ** 0.1, DEFAULT_GAMMA)
            trace = wall_residual(build_w0(p).total)
            good = trace <= 1e-8
            details.append(f"{'PASS' if good else 'FAIL'} W0 wall trace at eps={eps:g}: {trace:.3g}")
            ok &= good
        eps = np.geomspace(1e-12, 1e-7, 6)
        amps = np.array([lift_amplitudes(e, 1.0) for e in eps])
        kmod = np.geomspace(3.0, 27.0, 6)
        kamps = np.array([lift_amplitudes(1e-12, k) for k in kmod])
        for j, (pe, pk) in enumerate(((-1 / 3, -2 / 3), (-1 / 3, -2 / 3), (-1 / 6, -1 / 3))):
            ok &= _report(details, fit_slope(eps, amps[:, j], f"|a{j + 1}|", "eps", pe, 0.05))
            ok &= _report(details, fit_slope(kmod, kamps[:, j], f"|a{j + 1}|", "|k|", pk, 0.05,
                                             strict=False))
        return ok
    return _timed(3, "boundary lifting", 60, body)


# -- 4: norm bookkeeping ---------------------------------------------------------------

def _synthetic(p: PhysParams, kind: str, order_p: float, order_q: float, alpha: float = 0.0) -> BeamSpec:
    return BeamSpec(p, SpectralAmplitude(order_p, order_q), kind, "unit", alpha, 0.0, 1.0)


# Synthetic beams: (kind, p, q, alpha).
NORM_BEAMS = {
    "beam": ("interior", 0.5, 1.0, 0.0),
    "beam2": ("interior", 0.0, -0.5, 0.0),
    "bl": ("boundary_layer", 0.25, 0.5, 1 / 3),
    "bl2": ("boundary_layer", 0.0, -0.5, 0.5),
}


def norm_rule_predictions() -> dict:
    """Predicted ``(eps, sigma)`` exponents of each norm and product rule for ``NORM_BEAMS``."""
    _, p, q, _ = NORM_BEAMS["beam"]
    _, p2, q2, _ = NORM_BEAMS["beam2"]
    _, pl, ql, al = NORM_BEAMS["bl"]
    _, pl2, ql2, al2 = NORM_BEAMS["bl2"]
    return {
        "beam L2": (p, -q),
        "bl L2": (1 / 6 + pl + al / 2, -ql - 0.5),
        "beam Linf": (p + 1 / 6, -q - 1),
        "bl Linf": (pl + 1 / 6, -ql - 1),
        "beam*beam L2": (p + p2 + 1 / 6, -1 - q - q2),
        "bl*bl L2": (pl + pl2 + max(al, al2) / 2 + 1 / 3, -1.5 - ql - ql2),
        "bl*beam L2": (pl + p + al / 2 + 1 / 3, -1.5 - ql - q),
    }


def norm_rule_values(p: PhysParams) -> dict:
    modes = {name: _synthetic(p, *spec).modal() for name, spec in NORM_BEAMS.items()}
    grid = wall_grid(modes["beam"].box, p, dmin=min(p.eps ** 0.5, p.eps ** (1 / 3)) / 8)
    return {
        "beam L2": modes["beam"].l2(),
        "bl L2": modes["bl"].l2(),
        "beam Linf": modes["beam"].evaluate(grid).linf(),
        "bl Linf": modes["bl"].evaluate(grid).linf(),
        "beam*beam L2": scalar_product(modes["beam"], modes["beam2"]).l2(),
        "bl*bl L2": scalar_product(modes["bl"], modes["bl2"]).l2(),
        "bl*beam L2": scalar_product(modes["bl"], modes["beam"]).l2(),
    }


def criterion_4() -> CriterionResult:
    def body(details):
        pred = norm_rule_predictions()
        eps = np.geomspace(1e-5, 10 ** -3.5, 5)
        sig = np.geomspace(0.02, 0.64, 5)
        by_eps = [norm_rule_values(sweep_params(e, 0.4)) for e in eps]
        by_sig = [norm_rule_values(sweep_params(1e-4, s)) for s in sig]
        ok = True
        for name, (pe, ps) in pred.items():
            ok &= _report(details, fit_slope(eps, [v[name] for v in by_eps], name, "eps", pe, 0.25))
            ok &= _report(details, fit_slope(sig, [v[name] for v in by_sig], name, "sigma", ps, 0.25))
        return ok
    return _timed(4, "norm bookkeeping", 300, body)


# -- 5-7: residuals and interactions ---------------------------------------------------

RESIDUAL_EPS = np.geomspace(1e-4, 10 ** -2.5, 5)
RESIDUAL_SIGMA = np.geomspace(0.02, 0.64, 5)
RESIDUAL_SIGMA_FIXED = 0.4
RESIDUAL_EPS_FIXED = 1e-4


def criterion_5() -> CriterionResult:
    def body(details):
        r_eps = [residual_w0(build_w0(sweep_params(e, RESIDUAL_SIGMA_FIXED))).l2 for e in RESIDUAL_EPS]
        r_sig = [residual_w0(build_w0(sweep_params(RESIDUAL_EPS_FIXED, s))).l2 for s in RESIDUAL_SIGMA]
        ok = _report(details, fit_slope(RESIDUAL_EPS, r_eps, "r0", "eps", 1.0, 0.15))
        return _report(details, fit_slope(RESIDUAL_SIGMA, r_sig, "r0", "sigma", -2.0, 0.2)) and ok
    return _timed(5, "linear residual", 300, body)


def criterion_6() -> CriterionResult:
    def body(details):
        def row(p):
            return {k: v.l2() for k, v in interaction_table(build_w0(p)).items()}
        by_eps = [row(sweep_params(e, RESIDUAL_SIGMA_FIXED)) for e in RESIDUAL_EPS]
        by_sig = [row(sweep_params(RESIDUAL_EPS_FIXED, s)) for s in RESIDUAL_SIGMA]
        ok = True
        for label, (_, _, pe, ps, _) in INTERACTIONS.items():
            ok &= _report(details, fit_slope(RESIDUAL_EPS, [r[label] for r in by_eps], label, "eps", pe, 0.25))
            ok &= _report(details, fit_slope(RESIDUAL_SIGMA, [r[label] for r in by_sig], label, "sigma",
                                             ps, 0.25))
        return ok
    return _timed(6, "interaction table", 600, body)


CORRECTOR_DELTA = 1e-2
CORRECTOR_DELTAS = np.geomspace(1e-4, 1e-2, 5)


def criterion_7() -> CriterionResult:
    def body(details):
        def r1(p):
            return residual_w1(build_w0(p)).l2
        r_eps = [r1(sweep_params(e, RESIDUAL_SIGMA_FIXED, CORRECTOR_DELTA)) for e in RESIDUAL_EPS]
        r_sig = [r1(sweep_params(RESIDUAL_EPS_FIXED, s, CORRECTOR_DELTA)) for s in RESIDUAL_SIGMA]
        base = build_w0(sweep_params(RESIDUAL_EPS_FIXED, RESIDUAL_SIGMA_FIXED, CORRECTOR_DELTA))
        r_delta, wall = [], 0.0
        for d in CORRECTOR_DELTAS:
            w0 = replace(base, params=replace(base.params, delta=float(d)))
            w1 = assemble_w1(w0)
            r_delta.append(residual_w1(w0, w1).l2)
            wall = max(wall, wall_residual(concat([w0.total, w1.total], "wapp")))
        ok = _report(details, fit_slope(RESIDUAL_EPS, r_eps, "r1", "eps", 1 / 6, 0.2))
        ok &= _report(details, fit_slope(RESIDUAL_SIGMA, r_sig, "r1", "sigma", -2.0, 0.2))
        ok &= _report(details, fit_slope(CORRECTOR_DELTAS, r_delta, "r1", "delta", 1.0, 0.2))
        wall_ok = wall <= 1e-8
        details.append(f"{'PASS' if wall_ok else 'FAIL'} W_app wall trace: {wall:.3g}")
        return ok and wall_ok
    return _timed(7, "corrector residual", 600, body)


# -- 8: localization -------------------------------------------------------------------

def localization_measurements(eps: float, rho: float = 0.05) -> dict:
    """Energy fraction of the incident beam outside the strip and BL norm share above the layer."""
    p = PhysParams(eps, eps ** 0.1, DEFAULT_GAMMA)
    w0 = build_w0(p)
    inc = w0.incident.evaluate(wall_grid(w0.box, p, ymax=w0.box.height))
    total = w0.bl13.energy_by_component().sum()
    below = w0.bl13.energy_by_component(ymax=eps ** (1 / 3 - p.mu)).sum()
    return {
        "outside strip (tilted)": cone_energy_fraction(inc, p, rho),
        "outside strip (untilted)": cone_energy_fraction(inc, p, rho, tilt=0.0),
        "bl13 above layer": math.sqrt(max(total - below, 0.0) / total),
        "mu": p.mu,
    }


def criterion_8() -> CriterionResult:
    def body(details):
        eps = np.geomspace(1e-4, 1e-2, 5)
        rows = [localization_measurements(e) for e in eps]
        ok = True
        for name in ("outside strip (tilted)", "outside strip (untilted)"):
            rep = fit_slope(eps, [r[name] for r in rows], name, "eps", 4.0, math.inf)
            good = rep.fitted_slope >= 4.0
            details.append(f"{'PASS' if good else 'FAIL'} {name}: decay exponent {rep.fitted_slope:.4f} "
                           f"(required >= 4); fractions {[round(r[name], 4) for r in rows]}")
            ok &= good
        mu = rows[0]["mu"]
        ok &= _report(details, fit_slope(eps, [r["bl13 above layer"] for r in rows], "bl13 above layer",
                                         "eps", 2 * mu / 3, 0.2))
        return ok
    return _timed(8, "localization", 180, body)


# -- 9: resonance ----------------------------------------------------------------------

def criterion_9(eps: float = 1e-3) -> CriterionResult:
    def body(details):
        p = PhysParams(eps, eps ** 0.1, DEFAULT_GAMMA)
        # The cancellation is algebraic; a small cell keeps the triple products affordable.
        bl = build_w0(p, length_factor=1.2, width_factor=2.4).bl13
        details.append(f"layer modes: {bl.size}")
        rep = resonance_cancellation_check(bl, p)
        cancel = rep.residual <= 1e-4
        details.append(f"{'PASS' if cancel else 'FAIL'} relative resonant residual {rep.residual:.3g}")
        ok = cancel
        for name, frac in rep.resonant_fraction.items():
            good = frac >= 0.1
            details.append(f"{'PASS' if good else 'FAIL'} term ({name}) resonant share {frac:.4f}")
            ok &= good
        return ok
    return _timed(9, "resonance cancellation", 120, body)


# -- 10: DNS stability -----------------------------------------------------------------

def criterion_10(dt: float = 5e-3) -> CriterionResult:
    def body(details):
        eps = 1e-2
        sigma = eps ** 0.1
        p = PhysParams(eps, sigma, DEFAULT_GAMMA, delta=math.sqrt(eps) * sigma ** (2 / 3))
        w0 = build_w0(p, length_factor=5.0, width_factor=10.0)
        coarse = stability_compare(p, dt=dt, w0=w0)
        fine = stability_compare(p, dt=dt / 2, w0=w0)
        ratio = np.max(coarse.deviation_sq / np.where(coarse.bound > 0, coarse.bound, np.inf))
        below = coarse.below_bound
        details.append(f"{'PASS' if below else 'FAIL'} deviation^2 below calibrated bound "
                       f"(C={coarse.calibration:.4g}, worst deviation^2/bound {ratio:.3g})")
        energy_ok = coarse.energy_margin <= 1e-4 and fine.energy_margin <= 1e-4
        details.append(f"{'PASS' if energy_ok else 'FAIL'} energy inequality margin "
                       f"{max(coarse.energy_margin, fine.energy_margin):.3g} (slack 1e-4)")
        change = abs(fine.final_deviation - coarse.final_deviation) / coarse.final_deviation
        dt_ok = change < 0.05
        details.append(f"{'PASS' if dt_ok else 'FAIL'} dt halving changes final deviation by {change:.3g}")
        return below and energy_ok and dt_ok
    return _timed(10, "DNS stability", 900, body)


# -- 11: Newton localization fuzz ------------------------------------------------------

def newton_fuzz(count: int = 1000, seed: int = 11, max_tries: int = 100000) -> dict:
    """Certify ``count`` random polynomials and check every disk against companion roots."""
    rng = np.random.default_rng(seed)
    tally = {"certified": 0, "rejected": 0, "false_certificates": 0}
    tries = 0
    while tally["certified"] < count:
        tries += 1
        if tries > max_tries:
            raise RuntimeError(f"only {tally['certified']} certified polynomials in {max_tries} tries")
        degree = int(rng.integers(1, 9))
        coeffs = rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1)
        oracle = polynomial_roots(coeffs)
        target = oracle[rng.integers(oracle.size)]
        mu0 = target + 10 ** rng.uniform(-8, -1) * np.exp(2j * math.pi * rng.uniform())
        try:
            loc = newton_localize(coeffs, mu0)
        except CertificationRejected:
            tally["rejected"] += 1
            continue
        tally["certified"] += 1
        companion = _companion_roots(coeffs)
        if not np.any(np.abs(companion - loc.center) <= loc.radius * (1 + 1e-9) + 1e-12):
            tally["false_certificates"] += 1
    return tally


def _companion_roots(coeffs) -> np.ndarray:
    """Eigenvalues of the companion matrix of ascending ``coeffs``."""
    c = np.asarray(coeffs, complex)
    n = c.size - 1
    comp = np.zeros((n, n), complex)
    comp[0, :] = -c[-2::-1] / c[-1]
    if n > 1:
        comp[1:, :-1] = np.eye(n - 1)
    return np.linalg.eigvals(comp)


def criterion_11() -> CriterionResult:
    def body(details):
        tally = newton_fuzz()
        good = tally["false_certificates"] == 0
        details.append(f"{'PASS' if good else 'FAIL'} {tally}")
        return good
    return _timed(11, "Newton localization fuzz", 10, body)


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 12)}


def run_all(numbers=None, echo: Callable[[str], None] | None = None) -> list:
    results = []
    for n in numbers or sorted(CRITERIA):
        res = CRITERIA[n]()
        if echo is not None:
            echo(res.line())
            for d in res.details:
                echo(f"    {d}")
        results.append(res)
    return results
