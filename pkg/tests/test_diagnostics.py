import logging
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cns2d.corpus import positive_corpus, random_band_limited
from cns2d.diagnostics import (CSV_COLUMNS, DiagnosticsRecord, check_inequality_ww7,
                               compute_record, gronwall_budget, hessian_log_integral, hs_energy,
                               interpolation_check_abc, residual_identity_deltac,
                               residual_identity_www)
from cns2d.integrator import IntegratorConfig, run
from cns2d.spectral import Grid
from cns2d.system import State, SystemParams, initial_data, potential

from conftest import smooth_field

seeds = st.integers(0, 2 ** 32 - 1)


def const_state(grid, n, c):
    z = np.zeros((grid.n_points, grid.n_points))
    return State(grid, z + n, z + c, np.zeros((2,) + z.shape))


def fake_record(t, F1, G1, undefined=False):
    vals = dict.fromkeys(f for f in CSV_COLUMNS if f not in ("hs1", "hs2"))
    vals.update(time=t, F1=F1, G1=G1)
    return DiagnosticsRecord(**{k: (0.0 if v is None else v) for k, v in vals.items()},
                             undefined=undefined)


class TestRecord:
    def test_trivial_state(self, grid32):
        r = compute_record(const_state(grid32, 0.0, 1.0))
        assert r.F1 == 0 and r.G1 == 0 and not r.undefined

    def test_zygmund_constant(self, grid32):
        r = compute_record(const_state(grid32, math.e - 1, 1.0))
        assert r.entropy_zygmund == pytest.approx(grid32.area * math.e, rel=1e-14)
        assert r.mass_n == pytest.approx(grid32.area * (math.e - 1), rel=1e-14)

    def test_composition(self, grid64):
        s = initial_data("two_bumps", grid64)
        r = compute_record(s, SystemParams("mollified", eps=0.2))
        assert r.F1 == pytest.approx(r.mass_n + r.entropy_zygmund + r.grad_sqrt_c_sq + r.kinetic)
        assert r.G1 == pytest.approx(r.diss_sqrt_n + r.diss_hessian_log + r.diss_cross
                                     + r.diss_grad_u)
        assert set(r.row()) == set(CSV_COLUMNS) and list(r.row()) == list(CSV_COLUMNS)
        assert r.row()["hs1"] == r.hs_energy[1]

    def test_hessian_log_against_fine_quadrature(self):
        g = Grid(64)
        X, _ = g.coords
        got = compute_record(State(g, 0 * X, np.exp(0.3 * np.sin(X)), np.zeros((2, 64, 64))))
        F = Grid(1024)
        XF, _ = F.coords
        oracle = F.integrate(np.exp(0.3 * np.sin(XF)) * (0.3 * np.sin(XF)) ** 2)
        assert got.diss_hessian_log == pytest.approx(oracle, rel=1e-6)

    def test_nonpositive_c_is_undefined(self, grid32):
        X, _ = grid32.coords
        s = State(grid32, 0 * X + 1, np.sin(X), np.zeros((2, 32, 32)))
        r = compute_record(s)
        assert r.undefined and math.isnan(r.diss_hessian_log) and math.isnan(r.residual_www)
        assert math.isnan(r.G1) and math.isfinite(r.F1)
        assert check_inequality_ww7(grid32, np.sin(X)) is None
        assert math.isnan(residual_identity_deltac(grid32, np.sin(X)))

    def test_floor_flag(self, grid32):
        X, _ = grid32.coords
        c = 1e-13 + 0.5 * (1 + np.cos(X)) ** 4
        assert compute_record(State(grid32, 0 * X, c, np.zeros((2, 32, 32)))).floored

    def test_dissipation_nonnegative_along_run(self, grid64):
        p = SystemParams(phi=potential("cosine", grid64))
        tr = run(initial_data("two_bumps", grid64), p, IntegratorConfig(t_end=0.3, sample_every=3))
        for r in tr.records:
            for v in (r.diss_sqrt_n, r.diss_hessian_log, r.diss_cross, r.diss_grad_u):
                assert v >= -1e-12


class TestIdentities:
    def test_constant(self, grid32):
        c = np.full((32, 32), 3.0)
        assert residual_identity_www(grid32, c) == 0.0
        assert residual_identity_deltac(grid32, np.full((32, 32), 4.0)) == 0.0

    def test_www_examples(self):
        g = Grid(256)
        X, Y = g.coords
        assert residual_identity_www(g, 2 + np.sin(X)) <= 1e-8
        assert residual_identity_www(g, np.exp(np.sin(X) + np.cos(Y))) <= 1e-7

    def test_deltac_example(self):
        g = Grid(256)
        _, Y = g.coords
        assert residual_identity_deltac(g, 2 + np.cos(Y)) <= 1e-9

    def test_deltac_stress_probe_reported(self):
        g = Grid(128)
        X, _ = g.coords
        c = 1e-3 + (1 + np.cos(X)) ** 2 / 4
        r = residual_identity_deltac(g, c)
        assert math.isfinite(r) and r >= 0

    @given(seeds)
    def test_www_refines(self, seed):
        rng = np.random.default_rng(seed)
        f = random_band_limited(rng, 12, 5.0)
        res = [residual_identity_www(Grid(n), np.exp(f.sample(Grid(n)))) for n in (32, 64)]
        assert res[1] < res[0] or res[1] <= 1e-14


class TestInequality:
    def test_constant(self, grid32):
        chk = check_inequality_ww7(grid32, np.full((32, 32), 2.0))
        assert chk.satisfied and chk.quartic == 0 and chk.hessian_log == 0

    def test_exp_sin(self):
        g = Grid(128)
        X, _ = g.coords
        chk = check_inequality_ww7(g, np.exp(np.sin(X)))
        assert chk.satisfied and 0 < chk.ratio <= 25
        assert chk.rhs_bound == pytest.approx(25 * chk.hessian_log)
        # 1D identity: int c^-3 |c'|^4 = int e^s cos^4 with c = e^sin x
        F = Grid(1024)
        XF, _ = F.coords
        assert chk.quartic == pytest.approx(F.integrate(np.exp(np.sin(XF)) * np.cos(XF) ** 4),
                                            rel=1e-9)

    @given(seeds)
    def test_random_fields(self, seed):
        g = Grid(64)
        for c in positive_corpus(g, seed, count=3):
            assert check_inequality_ww7(g, c).satisfied


class TestInterpolation:
    def test_zero(self, grid32):
        chk = interpolation_check_abc(grid32, np.zeros((32, 32)))
        assert chk.lhs == 0 and chk.ratio == 0

    def test_negative_rejected(self, grid32):
        with pytest.raises(ValueError):
            interpolation_check_abc(grid32, np.sin(grid32.coords[0]))

    @pytest.mark.parametrize("sigma_frac", [0.1, 0.05])
    def test_bumps(self, sigma_frac):
        g = Grid(256, 10.0)
        X, Y = g.coords
        s = sigma_frac * g.box_length
        n = np.exp(-((X - 5) ** 2 + (Y - 5) ** 2) / (2 * s * s)) / (2 * np.pi * s * s)
        # unit mass up to the periodic tail beyond 5 sigma
        assert g.integrate(n) == pytest.approx(1.0, rel=1e-5)
        assert interpolation_check_abc(g, n).ratio <= 50

    @given(seeds)
    def test_corpus_envelope(self, seed):
        g = Grid(64)
        for c in positive_corpus(g, seed, count=3):
            assert interpolation_check_abc(g, c - c.min()).ratio <= 50


class TestHsEnergy:
    def test_zero_and_single_mode(self, grid32):
        assert hs_energy(State.zeros(grid32), 2) == 0
        X, _ = grid32.coords
        s = State(grid32, np.sin(X), 0 * X, np.zeros((2, 32, 32)))
        assert hs_energy(s, 1) == pytest.approx(4 * np.pi ** 2, rel=1e-14)

    def test_negative_s(self, grid32):
        with pytest.raises(ValueError):
            hs_energy(State.zeros(grid32), -1)

    @given(seeds)
    def test_per_mode_oracle(self, seed):
        g = Grid(32, 3.0)
        f = [smooth_field(g, seed + i) for i in range(4)]
        s = State(g, f[0], f[1], np.stack(f[2:]))
        m = np.fft.fftfreq(32, 1 / 32)
        m[16] = 16
        k2 = (2 * np.pi / 3.0) ** 2 * (m[None, :] ** 2 + m[:, None] ** 2)
        weights = ((1 + k2) ** 2, (1 + k2) ** 3, (1 + k2) ** 2, (1 + k2) ** 2)
        oracle = sum(g.area * np.sum(w * np.abs(np.fft.fft2(x) / 32 ** 2) ** 2)
                     for w, x in zip(weights, f))
        assert hs_energy(s, 2) == pytest.approx(oracle, rel=1e-10)


class TestGronwall:
    def test_zero_trajectory(self, grid32):
        tr = run(State.zeros(grid32), SystemParams(), IntegratorConfig(dt=0.1, t_end=0.5))
        rep = gronwall_budget(tr.records)
        assert rep.constant == 0 and rep.interior_constant == 0

    def test_synthetic(self):
        recs = [fake_record(t, 1.0, 0.0) for t in (0.0, 0.5, 1.0)]
        rep = gronwall_budget(recs)
        # budget = 1 + t + t
        assert rep.constant == pytest.approx(1.0)
        assert rep.interior_constant == pytest.approx(0.5)
        assert np.all(rep.slack() <= 1e-15)

    def test_dissipation_counts(self):
        recs = [fake_record(t, 1.0, 4.0) for t in (0.0, 1.0)]
        assert gronwall_budget(recs).constant == pytest.approx(5.0 / 3.0)

    def test_undefined_excluded(self, caplog):
        recs = [fake_record(0.0, 1.0, 0.0), fake_record(0.5, 1.0, math.nan, undefined=True),
                fake_record(1.0, 1.0, 0.0)]
        with caplog.at_level(logging.WARNING):
            rep = gronwall_budget(recs)
        assert rep.excluded == 1 and "excluded" in caplog.text
        with pytest.raises(ValueError):
            gronwall_budget([recs[1]])
