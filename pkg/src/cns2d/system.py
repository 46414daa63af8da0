"""Right-hand sides of the chemotaxis-Navier-Stokes hierarchy.

Three levels share one state layout:

* ``full``      -- the original system,
* ``mollified`` -- chemotactic drift, consumption and buoyancy seen through
  the mollifier,
* ``truncated`` -- the mollified system with the frequency cut-off J_k
  placed exactly where the Galerkin ODE puts it.

Pressure never appears: every velocity tendency is passed through the
Leray projector. Transport terms are written in divergence form, so the
mean of every transport contribution vanishes identically.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .spectral import Grid, GridMismatch, gaussian_profile

LEVELS = ("full", "mollified", "truncated")

# A source returns (s_n, s_c, s_u) in physical space at time t.
Source = Callable[[float], tuple]


@dataclass
class State:
    """Cell density n, chemical c and velocity u at one time instant."""

    grid: Grid
    n: np.ndarray
    c: np.ndarray
    u: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.n = self.grid.check_scalar(np.asarray(self.n, dtype=float), "n")
        self.c = self.grid.check_scalar(np.asarray(self.c, dtype=float), "c")
        self.u = self.grid.check_vector(np.asarray(self.u, dtype=float), "u")

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> "State":
        z = np.zeros((grid.n_points, grid.n_points))
        return cls(grid, z, z.copy(), np.zeros((2,) + z.shape), time)

    def stacked(self) -> np.ndarray:
        """(4, N, N) array [n, c, u_x, u_y]."""
        return np.concatenate([self.n[None], self.c[None], self.u])

    @classmethod
    def from_stacked(cls, grid: Grid, y: np.ndarray, time: float) -> "State":
        return cls(grid, y[0], y[1], y[2:4], time)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.n)) and np.all(np.isfinite(self.c))
                    and np.all(np.isfinite(self.u)))

    def divergence_ratio(self) -> float:
        """max|div u| / max|u| (0 for u = 0)."""
        umax = float(np.max(np.abs(self.u)))
        if umax == 0.0:
            return 0.0
        return float(np.max(np.abs(self.grid.divergence(self.u)))) / umax


@dataclass
class StateDerivative:
    dn: np.ndarray
    dc: np.ndarray
    du: np.ndarray


@dataclass
class SystemParams:
    """Which level of the hierarchy to integrate and its parameters.

    ``eps`` is required for the mollified and truncated levels and must be
    absent for the full level; ``k_trunc`` only belongs to the truncated
    level. ``phi`` defaults to the zero potential. Setting ``nonlinear`` to
    False leaves only the diffusion (plus any ``source``).
    """

    level: str = "full"
    eps: Optional[float] = None
    k_trunc: Optional[float] = None
    phi: Optional[np.ndarray] = None
    trunc_mode: str = "annulus"
    nonlinear: bool = True
    source: Optional[Source] = field(default=None, repr=False)

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}, got {self.level!r}")
        if self.level == "full":
            if self.eps is not None:
                raise ValueError("eps is only meaningful for the mollified/truncated levels")
            if self.k_trunc is not None:
                raise ValueError("k_trunc is only meaningful for the truncated level")
        else:
            if self.eps is None or not 0 < self.eps < 1:
                raise ValueError(f"level {self.level!r} needs eps in (0, 1), got {self.eps}")
            if self.level == "truncated":
                if self.k_trunc is None or not self.k_trunc >= 1:
                    raise ValueError(f"truncated level needs k_trunc >= 1, got {self.k_trunc}")
            elif self.k_trunc is not None:
                raise ValueError("k_trunc is only meaningful for the truncated level")
        if self.trunc_mode not in ("annulus", "lowpass"):
            raise ValueError(f"trunc_mode must be 'annulus' or 'lowpass', got {self.trunc_mode!r}")

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


class SystemOperator:
    """Precomputed symbols for one (grid, params) pair.

    The split is ``dy/dt = linear * y_hat + nonlinear_hat(y_hat, t)`` in
    spectral space, with ``y_hat`` stacked as [n, c, u_x, u_y].
    """

    def __init__(self, grid: Grid, params: SystemParams):
        self.grid = grid
        self.params = params
        phi = params.phi
        if phi is None:
            self.grad_phi = None
        else:
            phi = grid.check_scalar(np.asarray(phi, dtype=float), "phi")
            self.grad_phi = grid.gradient(phi)
            if not np.all(np.isfinite(self.grad_phi)):
                raise ValueError("potential gradient is not finite")
            if not np.any(self.grad_phi):
                self.grad_phi = None
        level = params.level
        self.rho = None if level == "full" else grid.mollifier_symbol(params.eps, gaussian_profile)
        if level == "truncated":
            self.J = grid.truncation_mask(params.k_trunc, params.trunc_mode).astype(float)
            self.linear = -grid.k_squared * self.J
        else:
            self.J = None
            self.linear = -grid.k_squared

    # products are formed in physical space and dealiased on the way back
    def _prod_hat(self, f: np.ndarray) -> np.ndarray:
        g = self.grid
        return g.forward_unchecked(f) * g.dealias_mask

    def nonlinear_hat(self, y_hat: np.ndarray, t: float = 0.0) -> np.ndarray:
        g = self.grid
        out = np.zeros_like(y_hat)
        if self.params.nonlinear:
            if self.J is None:
                self._untruncated(y_hat, out)
            else:
                self._truncated(y_hat, out)
        src = self.params.source
        if src is not None:
            sn, sc, su = src(t)
            fw = g.forward_unchecked
            out[0] += fw(np.asarray(sn, dtype=float))
            out[1] += fw(np.asarray(sc, dtype=float))
            out[2:4] += g.leray_hat(fw(np.asarray(su, dtype=float)))
        return out

    def _untruncated(self, y_hat, out):
        g = self.grid
        n_hat, c_hat, u_hat = y_hat[0], y_hat[1], y_hat[2:4]
        n, c, u = g.inverse(n_hat), g.inverse(c_hat), g.inverse(u_hat)
        cs_hat = c_hat if self.rho is None else self.rho * c_hat
        grad_cs = g.inverse(g.gradient_hat(cs_hat))
        n_react = n if self.rho is None else g.inverse(self.rho * n_hat)

        flux_n = self._prod_hat(u * n + n * grad_cs)
        out[0] = -g.divergence_hat(flux_n)
        out[1] = -g.divergence_hat(self._prod_hat(u * c)) - self._prod_hat(c * n_react)
        du = -self._advect_u_hat(u)
        if self.grad_phi is not None:
            force = self._prod_hat(n * self.grad_phi)
            du = du + (force if self.rho is None else self.rho * force)
        out[2:4] = g.leray_hat(du)

    def _truncated(self, y_hat, out):
        g, J, rho = self.grid, self.J, self.rho
        n_hat, c_hat, u_hat = y_hat[0], y_hat[1], y_hat[2:4]
        Jn, Jc, Ju = g.inverse(J * n_hat), g.inverse(J * c_hat), g.inverse(J * u_hat)
        grad_cs = g.inverse(g.gradient_hat(rho * c_hat))
        n_moll = g.inverse(rho * n_hat)

        out[0] = -J * g.divergence_hat(self._prod_hat(Ju * Jn + Jn * grad_cs))
        out[1] = -J * (g.divergence_hat(self._prod_hat(Ju * Jc)) + self._prod_hat(Jc * n_moll))
        du = -self._advect_u_hat(Ju)
        if self.grad_phi is not None:
            n = g.inverse(n_hat)
            du = du + rho * self._prod_hat(n * self.grad_phi)
        out[2:4] = J * g.leray_hat(du)

    def _advect_u_hat(self, u):
        # (u . grad) u = div(u (x) u) for solenoidal u
        g = self.grid
        uxx = self._prod_hat(u[0] * u[0])
        uxy = self._prod_hat(u[0] * u[1])
        uyy = self._prod_hat(u[1] * u[1])
        return np.stack([g.divergence_hat(np.stack([uxx, uxy])),
                         g.divergence_hat(np.stack([uxy, uyy]))])

    def full_hat(self, y_hat: np.ndarray, t: float = 0.0) -> np.ndarray:
        lin = self.linear * y_hat
        if self.J is not None:
            # A J_k^2 u = -P Lap J_k u; keeps the contract explicit for u
            lin[2:4] = self.grid.leray_hat(lin[2:4])
        return lin + self.nonlinear_hat(y_hat, t)


def rhs(state: State, params: SystemParams) -> StateDerivative:
    """Time derivative of ``state`` under the selected level."""
    g = state.grid
    if not state.is_finite():
        raise ValueError(f"state at t={state.time} contains NaN or inf")
    op = SystemOperator(g, params)
    d = g.inverse(op.full_hat(g.forward(state.stacked()), state.time))
    return StateDerivative(d[0], d[1], d[2:4])


# ---------------------------------------------------------------- initial data
def _gaussian(grid: Grid, center, sigma):
    X, Y = grid.coords
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    return np.exp(-r2 / (2 * sigma ** 2))


def velocity_from_stream(grid: Grid, psi: np.ndarray) -> np.ndarray:
    """u = (d_y psi, -d_x psi), divergence-free to round-off."""
    gx, gy = grid.gradient(psi)
    return np.stack([gy, -gx])


@dataclass(frozen=True)
class BumpSpec:
    """Shape parameters for the Gaussian presets, lengths in units of L/(2 pi)."""

    n_background: float = 0.1
    n_mass: float = 1.0
    n_sigma: float = 0.2
    n_center: tuple = (0.45, 0.5)
    c_background: float = 0.3
    c_amplitude: float = 0.7
    c_sigma: float = 0.5
    c_center: tuple = (0.55, 0.5)
    u_amplitude: float = 0.2
    u_sigma: float = 0.6
    second_mass: float = 0.6
    second_center: tuple = (0.3, 0.7)


def prescribed_mass(grid: Grid, preset: str, spec: BumpSpec = BumpSpec()) -> float:
    """Analytic L^1 mass of the cell density for a Gaussian preset."""
    scale = grid.box_length / (2 * np.pi)
    total = spec.n_background * grid.area + spec.n_mass * scale ** 2
    if preset == "two_bumps":
        total += spec.second_mass * scale ** 2
    return total


def initial_data(kind: str, grid: Grid, spec: BumpSpec = BumpSpec(), **kwargs) -> State:
    """Build a preset initial state.

    ``gaussian_bump`` and ``two_bumps`` give strictly positive n, c and a
    solenoidal velocity from a Gaussian stream function; ``manufactured``
    returns the manufactured solution at t = 0; ``zero`` is the trivial
    state.
    """
    if kind == "zero":
        return State.zeros(grid)
    if kind == "manufactured":
        from .manufactured import ManufacturedSolution
        return ManufacturedSolution(**kwargs).state(grid, 0.0)
    if kind not in ("gaussian_bump", "two_bumps"):
        raise ValueError(f"unknown preset {kind!r}")
    if kwargs:
        spec = replace(spec, **kwargs)
    L = grid.box_length
    scale = L / (2 * np.pi)
    sig_n = spec.n_sigma * scale
    # n_mass is the bump mass measured in units of scale^2
    peak = spec.n_mass * scale ** 2 / (2 * np.pi * sig_n ** 2)
    n = spec.n_background + peak * _gaussian(grid, np.multiply(spec.n_center, L), sig_n)
    if kind == "two_bumps":
        peak2 = spec.second_mass * scale ** 2 / (2 * np.pi * sig_n ** 2)
        n = n + peak2 * _gaussian(grid, np.multiply(spec.second_center, L), sig_n)
    c = spec.c_background + spec.c_amplitude * _gaussian(
        grid, np.multiply(spec.c_center, L), spec.c_sigma * scale)
    psi = spec.u_amplitude * scale * _gaussian(grid, (0.5 * L, 0.5 * L), spec.u_sigma * scale)
    u = velocity_from_stream(grid, psi)
    return State(grid, n, c, u, 0.0)


def potential(kind: str, grid: Grid, amplitude: float = 1.0) -> Optional[np.ndarray]:
    """Gravitational potential presets: ``zero`` or ``cosine``.

    ``cosine`` is phi = a (L/2pi) cos(2 pi y / L), a smooth periodic stand-in
    for a tilted potential with |grad phi| <= a.
    """
    if kind == "zero":
        return None
    if kind == "cosine":
        _, Y = grid.coords
        L = grid.box_length
        return amplitude * L / (2 * np.pi) * np.cos(2 * np.pi * Y / L)
    raise ValueError(f"unknown potential {kind!r}")


def mollify_state(state: State, eps: float) -> State:
    """Initial data smoothed by the mollifier, as the regularized problem uses."""
    g = state.grid
    u = np.stack([g.mollify(state.u[0], eps), g.mollify(state.u[1], eps)])
    return State(g, g.mollify(state.n, eps), g.mollify(state.c, eps), u, state.time)


def check_grid(a: State, b: State):
    if a.grid != b.grid:
        raise GridMismatch(f"states live on different grids: {a.grid} vs {b.grid}")
