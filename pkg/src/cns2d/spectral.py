"""Fourier-side field arithmetic on the periodic square [0, L)^2.

Real fields are ``(N, N)`` float arrays indexed ``[iy, ix]`` (row-major,
y-outer); vector fields are ``(2, N, N)`` arrays holding the x and y
components. Spectral coefficients are full complex ``(N, N)`` arrays scaled
as Fourier-series coefficients, so the mean of a field is its ``(0, 0)``
coefficient and ``int f^2 = L^2 * sum |f_hat|^2``.
"""
from __future__ import annotations

from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft as sfft

TruncMode = str  # "annulus" | "lowpass"


def gaussian_profile(eta_sq: np.ndarray) -> np.ndarray:
    """Mollifier multiplier as a function of |eta|^2: exp(-|eta|^2)."""
    return np.exp(-eta_sq)


class GridMismatch(ValueError):
    pass


class Grid:
    """Uniform periodic grid with cached wavenumber tables.

    Parameters
    ----------
    n_points : int
        Points per axis; even and at least 8.
    box_length : float
        Side length L of the torus.
    """

    def __init__(self, n_points: int, box_length: float = 2 * np.pi):
        if int(n_points) != n_points or n_points < 8 or n_points % 2:
            raise ValueError(f"n_points must be an even integer >= 8, got {n_points}")
        if not np.isfinite(box_length) or box_length <= 0:
            raise ValueError(f"box_length must be positive, got {box_length}")
        self.n_points = int(n_points)
        self.box_length = float(box_length)
        self._masks: dict = {}

    def __repr__(self):
        return f"Grid(n_points={self.n_points}, box_length={self.box_length!r})"

    def __eq__(self, other):
        return (isinstance(other, Grid) and other.n_points == self.n_points
                and other.box_length == self.box_length)

    def __hash__(self):
        return hash((self.n_points, self.box_length))

    def __getstate__(self):
        return {"n_points": self.n_points, "box_length": self.box_length}

    def __setstate__(self, state):
        self.__init__(state["n_points"], state["box_length"])

    # ------------------------------------------------------------------ tables
    @property
    def dx(self) -> float:
        return self.box_length / self.n_points

    @property
    def cell_area(self) -> float:
        return self.dx ** 2

    @property
    def area(self) -> float:
        return self.box_length ** 2

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Signed integer index per FFT slot, in (-N/2, N/2]."""
        m = np.fft.fftfreq(self.n_points, 1.0 / self.n_points).astype(np.int64)
        m[self.n_points // 2] = self.n_points // 2
        return m

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n_points) * self.dx
        return np.meshgrid(x, x, indexing="xy")

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        scale = 2 * np.pi / self.box_length
        kx, ky = np.meshgrid(scale * self.mode_index, scale * self.mode_index, indexing="xy")
        return kx, ky

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky = self.wavenumbers
        return kx ** 2 + ky ** 2

    @cached_property
    def derivative_wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        # Nyquist row/column zeroed for odd derivatives so their output stays real.
        kx, ky = (k.copy() for k in self.wavenumbers)
        nyq = self.n_points // 2
        kx[:, nyq] = 0.0
        ky[nyq, :] = 0.0
        return kx, ky

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        m = np.abs(self.mode_index)
        keep = 3 * m <= self.n_points
        return keep[None, :] & keep[:, None]

    @cached_property
    def _leray_factors(self):
        kx, ky = self.derivative_wavenumbers
        kd2 = kx ** 2 + ky ** 2
        inv = np.zeros_like(kd2)
        np.divide(1.0, kd2, out=inv, where=kd2 > 0)
        return kx, ky, inv

    # --------------------------------------------------------------- checking
    def check_scalar(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        f = np.asarray(f)
        if f.shape != (self.n_points, self.n_points):
            raise GridMismatch(f"{name} has shape {f.shape}, grid expects "
                               f"{(self.n_points, self.n_points)}")
        return f

    def check_vector(self, v: np.ndarray, name: str = "vector field") -> np.ndarray:
        v = np.asarray(v)
        if v.shape != (2, self.n_points, self.n_points):
            raise GridMismatch(f"{name} has shape {v.shape}, grid expects "
                               f"{(2, self.n_points, self.n_points)}")
        return v

    # ------------------------------------------------------------- transforms
    def forward(self, f: np.ndarray) -> np.ndarray:
        """Fourier-series coefficients of a real (or stacked real) field."""
        f = np.asarray(f, dtype=float)
        if f.shape[-2:] != (self.n_points, self.n_points):
            raise GridMismatch(f"field shape {f.shape} does not match {self}")
        if not np.all(np.isfinite(f)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(f))[0])
            raise ValueError(f"non-finite value in field at index {bad}")
        return sfft.fft2(f, axes=(-2, -1)) / self.n_points ** 2

    def forward_unchecked(self, f: np.ndarray) -> np.ndarray:
        """``forward`` without validation, for internal products that may overflow."""
        return sfft.fft2(f, axes=(-2, -1)) / self.n_points ** 2

    def inverse(self, f_hat: np.ndarray) -> np.ndarray:
        return sfft.ifft2(f_hat * self.n_points ** 2, axes=(-2, -1)).real

    def parseval_weight(self) -> float:
        """Factor turning sum |coef|^2 into the L^2 integral."""
        return self.area

    # ------------------------------------------------------------- operators
    def gradient(self, f: np.ndarray) -> np.ndarray:
        f_hat = self.forward(self.check_scalar(f))
        kx, ky = self.derivative_wavenumbers
        return self.inverse(np.stack([1j * kx * f_hat, 1j * ky * f_hat]))

    def divergence(self, v: np.ndarray) -> np.ndarray:
        v_hat = self.forward(self.check_vector(v))
        return self.inverse(self.divergence_hat(v_hat))

    def divergence_hat(self, v_hat: np.ndarray) -> np.ndarray:
        kx, ky = self.derivative_wavenumbers
        return 1j * kx * v_hat[0] + 1j * ky * v_hat[1]

    def gradient_hat(self, f_hat: np.ndarray) -> np.ndarray:
        kx, ky = self.derivative_wavenumbers
        return np.stack([1j * kx * f_hat, 1j * ky * f_hat])

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.inverse(-self.k_squared * self.forward(f))

    def bessel_symbol(self, s: float) -> np.ndarray:
        return (1.0 + self.k_squared) ** (0.5 * s)

    def bessel(self, f: np.ndarray, s: float) -> np.ndarray:
        """Apply (I - Laplacian)^(s/2)."""
        return self.inverse(self.bessel_symbol(s) * self.forward(f))

    def sobolev_norm(self, f: np.ndarray, s: float) -> float:
        """H^s norm; accepts scalar or vector fields (componentwise sum)."""
        return np.sqrt(self.sobolev_norm_sq_hat(self.forward(f), s))

    def sobolev_norm_sq_hat(self, f_hat: np.ndarray, s: float) -> float:
        w = (1.0 + self.k_squared) ** s
        return float(self.area * np.sum(w * np.abs(f_hat) ** 2))

    def truncation_mask(self, k: float, mode: TruncMode = "annulus") -> np.ndarray:
        if not k > 0:
            raise ValueError(f"truncation parameter k must be positive, got {k}")
        if mode not in ("annulus", "lowpass"):
            raise ValueError(f"unknown truncation mode {mode!r}")
        key = (float(k), mode)
        mask = self._masks.get(key)
        if mask is None:
            k2 = self.k_squared
            mask = k2 <= k * k
            if mode == "annulus":
                mask &= k2 >= 1.0 / (k * k)
            self._masks[key] = mask
        return mask

    def freq_truncate(self, f: np.ndarray, k: float, mode: TruncMode = "annulus") -> np.ndarray:
        """Keep modes with 1/k <= |xi| <= k (annulus) or |xi| <= k (lowpass)."""
        mask = self.truncation_mask(k, mode)
        return self.inverse(mask * self.forward(f))

    def mollifier_symbol(self, eps: float,
                         profile: Callable[[np.ndarray], np.ndarray] = gaussian_profile) -> np.ndarray:
        if not 0 < eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {eps}")
        return profile(eps * eps * self.k_squared)

    def mollify(self, f: np.ndarray, eps: float,
                profile: Callable[[np.ndarray], np.ndarray] = gaussian_profile) -> np.ndarray:
        """Convolution with the Friedrichs mollifier, realized as a multiplier."""
        return self.inverse(self.mollifier_symbol(eps, profile) * self.forward(f))

    def leray_hat(self, v_hat: np.ndarray) -> np.ndarray:
        kx, ky, inv = self._leray_factors
        proj = (kx * v_hat[0] + ky * v_hat[1]) * inv
        return np.stack([v_hat[0] - kx * proj, v_hat[1] - ky * proj])

    def leray_project(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto divergence-free fields."""
        return self.inverse(self.leray_hat(self.forward(self.check_vector(v))))

    def inverse_laplacian(self, f: np.ndarray) -> np.ndarray:
        """Zero-mean solution q of Laplacian q = f - mean(f)."""
        k2 = self.k_squared
        inv = np.zeros_like(k2)
        np.divide(-1.0, k2, out=inv, where=k2 > 0)
        return self.inverse(inv * self.forward(f))

    def dealias(self, f: np.ndarray) -> np.ndarray:
        return self.inverse(self.dealias_mask * self.forward(f))

    # ---------------------------------------------------------------- quadrature
    def integrate(self, f: np.ndarray) -> float:
        """Trapezoidal (periodic) quadrature over the box."""
        return float(np.sum(f) * self.cell_area)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.sum(f * g) * self.cell_area)

    def l2_norm(self, f: np.ndarray) -> float:
        return np.sqrt(self.inner(f, f))


def is_hermitian(f_hat: np.ndarray) -> bool:
    """True when coefficient at -m is the conjugate of the one at m."""
    flipped = np.roll(np.flip(f_hat, axis=(-2, -1)), 1, axis=(-2, -1))
    scale = max(1.0, float(np.max(np.abs(f_hat))))
    return bool(np.max(np.abs(flipped - np.conj(f_hat))) <= 1e-13 * scale)
