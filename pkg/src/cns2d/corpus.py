"""Seeded random smooth fields for property checks.

A ``BandLimited`` field holds Fourier coefficients on |m_i| <= M, so it can
be sampled exactly on any grid with N > 2M; exponentiating gives smooth
positive fields that are *not* band-limited, which is what the identity
residual refinement checks need.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .spectral import Grid


@dataclass
class BandLimited:
    coef: np.ndarray        # (2M+1, 2M+1), index [my + M, mx + M]
    box_length: float = 2 * np.pi

    @property
    def max_mode(self) -> int:
        return (self.coef.shape[0] - 1) // 2

    def sample(self, grid: Grid) -> np.ndarray:
        M = self.max_mode
        N = grid.n_points
        if 2 * M >= N:
            raise ValueError(f"grid N={N} cannot resolve modes up to {M}")
        if grid.box_length != self.box_length:
            raise ValueError("box length mismatch")
        idx = np.arange(-M, M + 1) % N
        full = np.zeros((N, N), dtype=complex)
        full[np.ix_(idx, idx)] = self.coef
        return np.fft.ifft2(full * N * N).real


def random_band_limited(rng: np.random.Generator, max_mode: int, width: float,
                        box_length: float = 2 * np.pi, peak: float = 1.0) -> BandLimited:
    """Complex Gaussian spectrum with envelope exp(-|m|^2 / (2 width^2)).

    The result is made Hermitian (real field) and scaled to max |g| = peak
    on a grid that resolves it.
    """
    m = np.arange(-max_mode, max_mode + 1)
    MX, MY = np.meshgrid(m, m, indexing="xy")
    env = np.exp(-(MX ** 2 + MY ** 2) / (2.0 * width ** 2))
    shape = env.shape
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * env
    c = 0.5 * (c + np.conj(c[::-1, ::-1]))
    field = BandLimited(c, box_length)
    g = field.sample(Grid(4 * max_mode + 4, box_length))
    scale = np.max(np.abs(g))
    if scale > 0:
        field.coef = field.coef * (peak / scale)
    return field


def www_corpus(seed: int = 0, count: int = 10, max_mode: int = 42,
               width: float = 14.0) -> List[BandLimited]:
    """Exponents g for c = exp(g): broadband fields that stress the quadrature."""
    rng = np.random.default_rng(seed)
    return [random_band_limited(rng, max_mode, width) for _ in range(count)]


def positive_corpus(grid: Grid, seed: int = 0, count: int = 200) -> List[np.ndarray]:
    """c = exp(g) with random bandwidth in [1, 8] and amplitude in [0.2, 2]."""
    rng = np.random.default_rng(seed)
    max_mode = min(24, grid.n_points // 3)
    out = []
    for _ in range(count):
        width = rng.uniform(1.0, 8.0)
        peak = rng.uniform(0.2, 2.0)
        g = random_band_limited(rng, max_mode, width, grid.box_length, peak).sample(grid)
        out.append(np.exp(g))
    return out


def random_state_fields(grid: Grid, seed: int):
    """(n, c, psi) for the ``random`` preset: positive n, c and a stream function."""
    rng = np.random.default_rng(seed)
    M = min(8, grid.n_points // 4)
    g = lambda peak: random_band_limited(rng, M, 3.0, grid.box_length, peak).sample(grid)
    n = 0.5 * np.exp(g(1.0))
    c = np.exp(g(0.5))
    psi = 0.2 * g(1.0)
    return n, c, psi
