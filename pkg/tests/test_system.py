import numpy as np
import pytest
from hypothesis import given, strategies as st

from cns2d.manufactured import ManufacturedSolution
from cns2d.spectral import Grid, GridMismatch
from cns2d.system import (BumpSpec, State, SystemParams, initial_data, mollify_state, potential,
                          prescribed_mass, rhs, velocity_from_stream)

from conftest import smooth_field

seeds = st.integers(0, 2 ** 32 - 1)
LEVEL_PARAMS = [SystemParams(), SystemParams("mollified", eps=0.2),
                SystemParams("truncated", eps=0.2, k_trunc=6),
                SystemParams("truncated", eps=0.2, k_trunc=6, trunc_mode="lowpass")]


def random_state(grid, seed, positive=True):
    n = smooth_field(grid, seed, peak=0.8)
    c = smooth_field(grid, seed + 1, peak=0.8)
    if positive:
        n, c = np.exp(n), np.exp(c)
    psi = smooth_field(grid, seed + 2, peak=0.3)
    return State(grid, n, c, velocity_from_stream(grid, psi))


def fd_rhs_full(n, c, u, h):
    """Second-order central differences, phi = 0."""
    dx = lambda f: (np.roll(f, -1, 1) - np.roll(f, 1, 1)) / (2 * h)
    dy = lambda f: (np.roll(f, -1, 0) - np.roll(f, 1, 0)) / (2 * h)
    lap = lambda f: (np.roll(f, -1, 0) + np.roll(f, 1, 0) + np.roll(f, -1, 1)
                     + np.roll(f, 1, 1) - 4 * f) / h ** 2
    dn = lap(n) - u[0] * dx(n) - u[1] * dy(n) - dx(n * dx(c)) - dy(n * dy(c))
    dc = lap(c) - u[0] * dx(c) - u[1] * dy(c) - n * c
    return dn, dc


class TestParams:
    @pytest.mark.parametrize("kwargs", [
        dict(level="full", eps=0.1), dict(level="full", k_trunc=4),
        dict(level="mollified"), dict(level="mollified", eps=1.0),
        dict(level="mollified", eps=0.1, k_trunc=4), dict(level="truncated", eps=0.1),
        dict(level="truncated", eps=0.1, k_trunc=0.5), dict(level="bogus"),
        dict(trunc_mode="square"),
    ])
    def test_inconsistent_params_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SystemParams(**kwargs)

    def test_with_revalidates(self):
        with pytest.raises(ValueError):
            SystemParams().with_(eps=0.1)
        assert SystemParams().with_(level="mollified", eps=0.1).eps == 0.1


class TestState:
    def test_shape_checked(self, grid32):
        z = np.zeros((32, 32))
        with pytest.raises(GridMismatch):
            State(grid32, z, np.zeros((16, 16)), np.zeros((2, 32, 32)))
        with pytest.raises(GridMismatch):
            State(grid32, z, z, z)

    def test_stacked_round_trip(self, grid32):
        s = random_state(grid32, 1)
        t = State.from_stacked(grid32, s.stacked(), 0.0)
        np.testing.assert_array_equal(t.u, s.u)


class TestRhs:
    @pytest.mark.parametrize("params", LEVEL_PARAMS)
    def test_zero_state(self, grid32, params):
        d = rhs(State.zeros(grid32), params)
        assert not np.any(d.dn) and not np.any(d.dc) and not np.any(d.du)

    def test_constants(self, grid32):
        z = np.zeros((32, 32))
        d = rhs(State(grid32, z + 2.0, z + 0.5, np.zeros((2, 32, 32))), SystemParams())
        np.testing.assert_allclose(d.dn, 0, atol=1e-14)
        np.testing.assert_allclose(d.dc, -1.0, rtol=1e-14)
        np.testing.assert_allclose(d.du, 0, atol=1e-14)

    def test_nan_rejected(self, grid32):
        s = State.zeros(grid32)
        s.n[0, 0] = np.nan
        with pytest.raises(ValueError):
            rhs(s, SystemParams())

    def test_finite_difference_oracle(self):
        N, M = 64, 1024
        out = []
        for n_pts in (N, M):
            g = Grid(n_pts)
            X, Y = g.coords
            n, c = 1 + 0.1 * np.sin(X), 1 + 0.1 * np.cos(Y)
            u = np.stack([-0.1 * np.sin(Y), 0 * X])
            out.append((g, n, c, u))
        g, n, c, u = out[0]
        d = rhs(State(g, n, c, u), SystemParams())
        G, nf, cf, uf = out[1]
        dn_fd, dc_fd = fd_rhs_full(nf, cf, uf, G.dx)
        s = M // N
        for spec_val, fd_val in ((d.dn, dn_fd[::s, ::s]), (d.dc, dc_fd[::s, ::s])):
            assert np.max(np.abs(spec_val - fd_val)) <= 1e-4 * np.max(np.abs(fd_val))
        # du = Lap u exactly here: (u.grad)u = 0 and phi = 0
        np.testing.assert_allclose(d.du[0], 0.1 * np.sin(g.coords[1]), atol=1e-14)

    @pytest.mark.parametrize("kind", ["unsteady", "steady"])
    def test_manufactured_solution_is_exact(self, kind):
        """With its source, the manufactured field satisfies the PDE: rhs = d/dt state."""
        g = Grid(32)
        ms = ManufacturedSolution(kind)
        t, h = 0.7, 1e-4
        d = rhs(ms.state(g, t), ms.params(g))
        dt = (ms.state(g, t + h).stacked() - ms.state(g, t - h).stacked()) / (2 * h)
        got = np.concatenate([d.dn[None], d.dc[None], d.du])
        assert np.max(np.abs(got - dt)) <= 1e-7

    @given(seeds, st.sampled_from(range(len(LEVEL_PARAMS))))
    def test_structural_invariants(self, seed, which):
        g = Grid(32)
        params = LEVEL_PARAMS[which].with_(phi=potential("cosine", g, 0.7))
        s = random_state(g, seed)
        d = rhs(s, params)
        if params.level != "truncated" or params.trunc_mode == "lowpass":
            assert abs(np.mean(d.dn)) <= 1e-13 * max(1.0, np.max(np.abs(d.dn)))
        assert np.mean(d.dc) <= 1e-13
        assert np.max(np.abs(g.divergence(d.du))) <= 1e-10 * max(1e-300, np.max(np.abs(d.du)))

    @given(seeds)
    def test_affine_in_phi(self, seed):
        g = Grid(32)
        s = random_state(g, seed)
        phi = potential("cosine", g, 1.0)
        d0, d1, d2 = (rhs(s, SystemParams(phi=a * phi)).du for a in (0.0, 1.0, 2.0))
        np.testing.assert_allclose(d2 - d1, d1 - d0, atol=1e-12)

    def test_mollified_tends_to_full(self, grid64):
        s = random_state(grid64, 5)
        phi = potential("cosine", grid64)
        full = rhs(s, SystemParams(phi=phi))
        errs = []
        for eps in (0.1, 0.05, 0.025):
            d = rhs(s, SystemParams("mollified", eps=eps, phi=phi))
            errs.append(np.sqrt(sum(grid64.integrate((a - b) ** 2) for a, b in
                                    ((d.dn, full.dn), (d.dc, full.dc), (d.du[0], full.du[0]),
                                     (d.du[1], full.du[1])))))
        assert errs[0] > errs[1] > errs[2] > 0

    def test_truncated_tends_to_mollified(self, grid64):
        g = grid64
        s = random_state(g, 9)
        moll = rhs(s, SystemParams("mollified", eps=0.2))

        def h1(d):
            return np.sqrt(sum(g.sobolev_norm(a, 1) ** 2 for a in (d.dn, d.dc, d.du[0], d.du[1])))

        for mode, strict in (("lowpass", True), ("annulus", False)):
            errs = []
            for k in (2, 4, 8, 16, 32):
                d = rhs(s, SystemParams("truncated", eps=0.2, k_trunc=k, trunc_mode=mode))
                errs.append(h1(type(d)(d.dn - moll.dn, d.dc - moll.dc, d.du - moll.du)))
            assert all(b <= a for a, b in zip(errs, errs[1:])), errs
            if strict:
                assert errs[-1] < 1e-3 * errs[0], errs

    def test_truncated_level_is_confined_to_annulus(self, grid32):
        s = random_state(grid32, 3)
        p = SystemParams("truncated", eps=0.2, k_trunc=4)
        d = rhs(s, p)
        mask = grid32.truncation_mask(4, "annulus")
        for f in (d.dn, d.dc, d.du[0], d.du[1]):
            assert np.max(np.abs(grid32.forward(f)[~mask])) <= 1e-14


class TestInitialData:
    @pytest.mark.parametrize("kind", ["gaussian_bump", "two_bumps", "manufactured"])
    def test_positive_and_solenoidal(self, grid64, kind):
        s = initial_data(kind, grid64)
        assert s.n.min() > 0 and s.c.min() > 0
        assert np.max(np.abs(grid64.divergence(s.u))) <= 1e-10

    @pytest.mark.parametrize("L", [2 * np.pi, 20.0])
    def test_two_bumps_mass(self, L):
        g = Grid(128, L)
        s = initial_data("two_bumps", g)
        assert np.isclose(g.integrate(s.n), prescribed_mass(g, "two_bumps"), rtol=1e-8)

    def test_bump_overrides(self, grid64):
        a = initial_data("gaussian_bump", grid64, n_mass=2.0)
        b = initial_data("gaussian_bump", grid64, BumpSpec(n_mass=2.0))
        np.testing.assert_array_equal(a.n, b.n)

    def test_zero_and_unknown(self, grid32):
        assert not np.any(initial_data("zero", grid32).stacked())
        with pytest.raises(ValueError):
            initial_data("volcano", grid32)
        with pytest.raises(ValueError):
            potential("linear", grid32)
        assert potential("zero", grid32) is None

    def test_mollify_state_preserves_mass(self, grid64):
        s = initial_data("gaussian_bump", grid64)
        m = mollify_state(s, 0.3)
        assert np.isclose(grid64.integrate(m.n), grid64.integrate(s.n), rtol=1e-13)
