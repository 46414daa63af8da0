"""Manufactured solutions for the full system.

Source terms are derived symbolically (sympy) from closed-form fields, so
they are independent of the spectral right-hand side they are used to
check. The velocity source is the unprojected residual; the system
operator projects it, which is exact because the manufactured velocity is
solenoidal.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp

from .spectral import Grid
from .system import State, SystemParams

KINDS = ("unsteady", "steady", "uniform")


@lru_cache(maxsize=None)
def _lambdified(kind: str, phi_amplitude: float):
    x, y, t = sp.symbols("x y t", real=True)
    if kind == "uniform":
        n = sp.Float(1.5) + 0 * x
        c = sp.Float(0.8) + 0 * x
        psi = 0 * x
    else:
        tn = sp.cos(t) if kind == "unsteady" else sp.Integer(1)
        ts = sp.sin(t) if kind == "unsteady" else sp.Rational(1, 2)
        te = sp.exp(-t / 2) if kind == "unsteady" else sp.Integer(1)
        n = 2 + sp.Rational(1, 2) * sp.sin(x) * tn + sp.Rational(3, 10) * sp.cos(y) * ts
        c = sp.Rational(3, 2) + sp.Rational(2, 5) * sp.cos(x + y) * te + sp.Rational(1, 5) * sp.sin(y) * tn
        psi = sp.Rational(3, 10) * sp.sin(x) * sp.sin(y) * tn
    phi = phi_amplitude * sp.cos(y)
    ux, uy = sp.diff(psi, y), -sp.diff(psi, x)

    def lap(f):
        return sp.diff(f, x, 2) + sp.diff(f, y, 2)

    def adv(f):
        return ux * sp.diff(f, x) + uy * sp.diff(f, y)

    s_n = sp.diff(n, t) + adv(n) - lap(n) + sp.diff(n * sp.diff(c, x), x) + sp.diff(n * sp.diff(c, y), y)
    s_c = sp.diff(c, t) + adv(c) - lap(c) + n * c
    s_ux = sp.diff(ux, t) + adv(ux) - lap(ux) - n * sp.diff(phi, x)
    s_uy = sp.diff(uy, t) + adv(uy) - lap(uy) - n * sp.diff(phi, y)
    fields = [sp.lambdify((x, y, t), e, "numpy") for e in (n, c, ux, uy)]
    sources = [sp.lambdify((x, y, t), e, "numpy") for e in (s_n, s_c, s_ux, s_uy)]
    phi_f = sp.lambdify((x, y), phi, "numpy")
    return fields, sources, phi_f


class ManufacturedSolution:
    """Closed-form (n*, c*, u*) with matching sources on the 2 pi torus.

    ``unsteady`` -- low-mode fields with cos t / sin t / exp(-t/2) factors;
    ``steady``   -- the same spatial profile frozen in time;
    ``uniform``  -- spatially constant n*, c*, u* = 0 (a fixed point of
    every integrating-factor step).
    """

    def __init__(self, kind: str = "unsteady", phi_amplitude: float = 0.5):
        if kind not in KINDS:
            raise ValueError(f"manufactured kind must be one of {KINDS}, got {kind!r}")
        self.kind = kind
        self.phi_amplitude = float(phi_amplitude)
        self._fields, self._sources, self._phi = _lambdified(kind, self.phi_amplitude)

    @staticmethod
    def _check(grid: Grid):
        if not np.isclose(grid.box_length, 2 * np.pi, rtol=0, atol=1e-14):
            raise ValueError("manufactured solutions are defined on the 2 pi torus")

    def _eval(self, funcs, grid: Grid, t: float) -> list:
        X, Y = grid.coords
        return [np.broadcast_to(np.asarray(f(X, Y, t), dtype=float), X.shape).copy()
                for f in funcs]

    def state(self, grid: Grid, t: float) -> State:
        self._check(grid)
        n, c, ux, uy = self._eval(self._fields, grid, t)
        return State(grid, n, c, np.stack([ux, uy]), t)

    def phi(self, grid: Grid) -> np.ndarray:
        X, Y = grid.coords
        return np.broadcast_to(np.asarray(self._phi(X, Y), dtype=float), X.shape).copy()

    def source(self, grid: Grid):
        self._check(grid)

        def src(t):
            sn, sc, sux, suy = self._eval(self._sources, grid, t)
            return sn, sc, np.stack([sux, suy])
        return src

    def params(self, grid: Grid) -> SystemParams:
        return SystemParams(level="full", phi=self.phi(grid), source=self.source(grid))

    def error(self, state: State) -> float:
        """Max-norm error over all four components against the exact fields."""
        exact = self.state(state.grid, state.time)
        return float(np.max(np.abs(state.stacked() - exact.stacked())))
