"""Entropy-energy functionals, dissipation terms and identity residuals.

Derivatives are spectral, integrals are periodic trapezoidal sums. Terms
that need ln c are undefined where c <= 0; they are reported as NaN and the
record is flagged. Integrands with negative powers of c use a floor
``C_FLOOR``; hitting the floor is logged.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .spectral import Grid
from .system import State, SystemParams

log = logging.getLogger(__name__)

C_FLOOR = 1e-12
UNDEFINED = math.nan
QUARTIC_CONSTANT = 25.0

CSV_COLUMNS = ("time", "mass_n", "linf_c", "entropy_zygmund", "grad_sqrt_c_sq", "kinetic",
               "F1", "diss_sqrt_n", "diss_hessian_log", "diss_cross", "diss_grad_u", "G1",
               "min_n", "min_c", "residual_www", "residual_deltac", "hs1", "hs2")


@dataclass
class DiagnosticsRecord:
    time: float
    mass_n: float
    linf_c: float
    entropy_zygmund: float
    grad_sqrt_c_sq: float
    kinetic: float
    F1: float
    diss_sqrt_n: float
    diss_hessian_log: float
    diss_cross: float
    diss_grad_u: float
    G1: float
    min_n: float
    min_c: float
    residual_www: float
    residual_deltac: float
    hs_energy: dict = field(default_factory=dict)
    undefined: bool = False
    floored: bool = False

    def row(self) -> dict:
        """Flat mapping keyed by ``CSV_COLUMNS`` (hs1/hs2 from ``hs_energy``)."""
        out = {f.name: getattr(self, f.name) for f in fields(self)
               if f.name in CSV_COLUMNS}
        out["hs1"] = self.hs_energy.get(1, UNDEFINED)
        out["hs2"] = self.hs_energy.get(2, UNDEFINED)
        return {k: out[k] for k in CSV_COLUMNS}


def _derivs(grid: Grid, f: np.ndarray):
    """First and second spectral derivatives: fx, fy, fxx, fyy, fxy."""
    f_hat = grid.forward(f)
    kx, ky = grid.derivative_wavenumbers
    Kx, Ky = grid.wavenumbers
    inv = grid.inverse
    return (inv(1j * kx * f_hat), inv(1j * ky * f_hat),
            inv(-Kx ** 2 * f_hat), inv(-Ky ** 2 * f_hat), inv(-kx * ky * f_hat))


def _positive(c: np.ndarray) -> bool:
    return bool(np.min(c) > 0)


def hessian_log_integral(grid: Grid, c: np.ndarray) -> float:
    """int c |D^2 ln c|^2 (Frobenius norm), ln c differentiated spectrally."""
    _, _, lxx, lyy, lxy = _derivs(grid, np.log(c))
    return grid.integrate(c * (lxx ** 2 + lyy ** 2 + 2 * lxy ** 2))


def residual_identity_www(grid: Grid, c: np.ndarray) -> float:
    """Relative residual of
    1/2 int c^-2 |grad c|^2 Lap c - int c^-1 |Lap c|^2 = -int c |D^2 ln c|^2.

    Returns NaN when c is not strictly positive.
    """
    c = grid.check_scalar(c, "c")
    if not _positive(c):
        return UNDEFINED
    cx, cy, cxx, cyy, _ = _derivs(grid, c)
    lap = cxx + cyy
    lhs = grid.integrate(0.5 * (cx ** 2 + cy ** 2) * lap / c ** 2 - lap ** 2 / c)
    rhs = -hessian_log_integral(grid, c)
    return abs(lhs - rhs) / (1.0 + abs(rhs))


def residual_identity_deltac(grid: Grid, c: np.ndarray) -> float:
    """max |Lap c - 2 |grad sqrt c|^2 - 2 sqrt c Lap sqrt c| / max |Lap c|."""
    c = grid.check_scalar(c, "c")
    if not _positive(c):
        return UNDEFINED
    lap_c = grid.laplacian(c)
    r = np.sqrt(c)
    rx, ry, rxx, ryy, _ = _derivs(grid, r)
    resid = lap_c - 2 * (rx ** 2 + ry ** 2) - 2 * r * (rxx + ryy)
    scale = float(np.max(np.abs(lap_c)))
    if scale == 0.0:
        return float(np.max(np.abs(resid)))
    return float(np.max(np.abs(resid))) / scale


@dataclass
class Ww7Check:
    quartic: float          # int c^-3 |grad c|^4
    hessian_c: float        # int c^-1 |D^2 c|^2
    hessian_log: float      # int c |D^2 ln c|^2
    rhs_bound: float        # 25 * hessian_log
    satisfied: bool

    @property
    def ratio(self) -> float:
        return self.quartic / self.hessian_log if self.hessian_log > 0 else 0.0


def check_inequality_ww7(grid: Grid, c: np.ndarray, tol: float = 1e-10) -> Optional[Ww7Check]:
    """Both sides of int c^-3 |grad c|^4 <= 25 int c |D^2 ln c|^2.

    The Hessian term int c^-1 |D^2 c|^2 is reported alongside. Returns None
    when c is not strictly positive.
    """
    c = grid.check_scalar(c, "c")
    if not _positive(c):
        return None
    cf = np.maximum(c, C_FLOOR)
    if np.any(c < C_FLOOR):
        log.warning("c floored at %g in quartic gradient integrand", C_FLOOR)
    cx, cy, cxx, cyy, cxy = _derivs(grid, c)
    quartic = grid.integrate((cx ** 2 + cy ** 2) ** 2 / cf ** 3)
    hess_c = grid.integrate((cxx ** 2 + cyy ** 2 + 2 * cxy ** 2) / cf)
    hess_log = hessian_log_integral(grid, c)
    bound = QUARTIC_CONSTANT * hess_log
    return Ww7Check(quartic, hess_c, hess_log, bound, quartic <= bound + tol)


def hs_energy(state: State, s: float) -> float:
    """||n||_{H^s}^2 + ||c||_{H^{s+1}}^2 + ||u||_{H^s}^2."""
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    g = state.grid
    return (g.sobolev_norm_sq_hat(g.forward(state.n), s)
            + g.sobolev_norm_sq_hat(g.forward(state.c), s + 1)
            + g.sobolev_norm_sq_hat(g.forward(state.u), s))


@dataclass
class AbcCheck:
    lhs: float
    rhs: float
    ratio: float


def interpolation_check_abc(grid: Grid, n: np.ndarray) -> AbcCheck:
    """||n||_2 against (1 + ||grad sqrt(n+1)||_2) ||n||_1^(1/2) for n >= 0."""
    n = grid.check_scalar(n, "n")
    if np.min(n) < 0:
        raise ValueError(f"interpolation check needs n >= 0, min is {np.min(n):.3e}")
    lhs = grid.l2_norm(n)
    nx, ny = grid.gradient(n)
    grad_sqrt = math.sqrt(grid.integrate((nx ** 2 + ny ** 2) / (4 * (n + 1))))
    rhs = (1 + grad_sqrt) * math.sqrt(grid.integrate(np.abs(n)))
    return AbcCheck(lhs, rhs, lhs / rhs if rhs > 0 else 0.0)


def compute_record(state: State, params: Optional[SystemParams] = None,
                   s_list: Sequence[float] = (1, 2)) -> DiagnosticsRecord:
    """Evaluate every monitored functional on one state."""
    g = state.grid
    n, c, u = state.n, state.c, state.u
    min_n, min_c = float(np.min(n)), float(np.min(c))
    # c == 0 identically is the chemical-free limit: log terms are taken as 0
    c_zero = not np.any(c)
    undefined = min_c <= 0 and not c_zero
    floored = bool(np.any(c < C_FLOOR))
    if floored:
        log.debug("c below floor %g at t=%g", C_FLOOR, state.time)

    mass_n = g.integrate(np.abs(n))
    linf_c = float(np.max(np.abs(c)))
    if min_n > -1:
        # positive part; equals (n+1)ln(n+1) wherever n >= 0
        entropy = g.integrate(np.maximum((n + 1) * np.log1p(n), 0.0))
    else:
        entropy, undefined = UNDEFINED, True
    kinetic = g.inner(u[0], u[0]) + g.inner(u[1], u[1])

    cx, cy = g.gradient(c)
    grad_sqrt_c_density = (cx ** 2 + cy ** 2) / (4 * np.maximum(c, C_FLOOR))
    grad_sqrt_c_sq = g.integrate(grad_sqrt_c_density)

    nx, ny = g.gradient(n)
    if min_n > -1:
        diss_sqrt_n = g.integrate((nx ** 2 + ny ** 2) / (4 * (n + 1)))
    else:
        diss_sqrt_n = UNDEFINED
    if c_zero:
        diss_hessian = 0.0
    elif undefined:
        diss_hessian = UNDEFINED
    else:
        diss_hessian = hessian_log_integral(g, c)
    eps = None if params is None or params.level == "full" else params.eps
    n_moll = n if eps is None else g.mollify(n, eps)
    diss_cross = g.integrate(n_moll * grad_sqrt_c_density)
    u_hat = g.forward(u)
    diss_grad_u = float(g.area * np.sum(g.k_squared * np.abs(u_hat) ** 2))

    F1 = mass_n + entropy + grad_sqrt_c_sq + kinetic
    G1 = diss_sqrt_n + diss_hessian + diss_cross + diss_grad_u
    hs = {s: hs_energy(state, s) for s in s_list}
    return DiagnosticsRecord(
        time=float(state.time), mass_n=mass_n, linf_c=linf_c, entropy_zygmund=entropy,
        grad_sqrt_c_sq=grad_sqrt_c_sq, kinetic=kinetic, F1=F1, diss_sqrt_n=diss_sqrt_n,
        diss_hessian_log=diss_hessian, diss_cross=diss_cross, diss_grad_u=diss_grad_u,
        G1=G1, min_n=min_n, min_c=min_c,
        residual_www=0.0 if c_zero else residual_identity_www(g, c),
        residual_deltac=0.0 if c_zero else residual_identity_deltac(g, c),
        hs_energy=hs, undefined=undefined, floored=floored)


@dataclass
class GronwallReport:
    constant: float
    times: np.ndarray
    lhs: np.ndarray        # F1(t) + int_0^t G1
    budget: np.ndarray     # F1(0) + t + int_0^t F1
    excluded: int = 0
    # same fit over samples with t > t0; the t0 sample alone forces C >= 1
    interior_constant: float = 0.0

    def slack(self) -> np.ndarray:
        """D(t) = lhs - C * budget; nonpositive by construction."""
        return self.lhs - self.constant * self.budget


def gronwall_budget(records: Iterable[DiagnosticsRecord]) -> GronwallReport:
    """Smallest C with F1(t) + int G1 <= C (F1(0) + t + int F1) at every sample."""
    records = list(records)
    good = [r for r in records if not r.undefined and np.isfinite(r.F1) and np.isfinite(r.G1)]
    excluded = len(records) - len(good)
    if excluded:
        log.warning("gronwall_budget: %d undefined record(s) excluded", excluded)
    if not good:
        raise ValueError("no defined records to budget")
    t = np.array([r.time for r in good])
    F1 = np.array([r.F1 for r in good])
    G1 = np.array([r.G1 for r in good])
    t_rel = t - t[0]
    lhs = F1 + cumulative_trapezoid(G1, t, initial=0.0)
    budget = F1[0] + t_rel + cumulative_trapezoid(F1, t, initial=0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(budget > 0, lhs / budget, np.where(lhs > 0, np.inf, 0.0))
    C = float(np.max(ratio))
    C_int = float(np.max(ratio[1:])) if ratio.size > 1 else 0.0
    return GronwallReport(max(C, 0.0), t, lhs, budget, excluded, max(C_int, 0.0))
