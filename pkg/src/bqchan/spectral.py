"""Discrete function spaces on the periodic channel T_x x (0,1).

Scalar fields are expanded in Fourier modes exp(2*pi*i*k*x) in x and either
sine (Dirichlet walls) or cosine (Neumann walls) modes in y, so the free-slip
boundary conditions hold identically per mode and the Stokes operator is the
plain negative Laplacian, diagonal in this basis.

Collocation uses the wall-inclusive uniform mesh y_j = j/ny (j = 0..ny) with
type-I discrete sine/cosine transforms; quadrature is trapezoid in y times
the rectangle rule in x, which is exact for band-limited integrands.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy import fft as _fft

from . import _kernels


class Parity(Enum):
    """y-expansion family: SINE vanishes at the walls, COSINE has zero
    normal derivative there."""

    COSINE = 0
    SINE = 1


@dataclass(frozen=True)
class Grid:
    """Discretization descriptor for Omega = T_x x (0,1), |Omega| = 1."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.nx % 2 != 0:
            raise ValueError(f"nx must be even and >= 4, got {self.nx}")
        if self.ny < 4:
            raise ValueError(f"ny must be >= 4, got {self.ny}")
        if self.lx != 1.0 or self.ly != 1.0:
            raise ValueError("only the unit torus-by-unit-height domain is supported")

    def modes(self, parity: Parity) -> int:
        return self.ny + 1 if parity is Parity.COSINE else self.ny

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) / self.nx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.ny + 1) / self.ny

    @cached_property
    def kx(self) -> np.ndarray:
        """x wavenumbers 2*pi*k in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.nx, d=1.0 / self.nx)

    @cached_property
    def k_index(self) -> np.ndarray:
        return np.fft.fftfreq(self.nx, d=1.0 / self.nx).astype(int)

    def ky(self, parity: Parity) -> np.ndarray:
        """y wavenumbers n*pi for the given parity's mode range."""
        if parity is Parity.COSINE:
            return np.pi * np.arange(self.ny + 1)
        return np.pi * np.arange(1, self.ny + 1)

    @cached_property
    def wy(self) -> np.ndarray:
        """Trapezoid weights on the wall-inclusive y mesh."""
        w = np.full(self.ny + 1, 1.0 / self.ny)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def laplacian_symbol(self, parity: Parity) -> np.ndarray:
        """lambda_{k,n} = (2*pi*k)^2 + (n*pi)^2 as an (nx, modes) array."""
        return self.kx[:, None] ** 2 + self.ky(parity)[None, :] ** 2

    @cached_property
    def _lam_cos(self) -> np.ndarray:
        return self.laplacian_symbol(Parity.COSINE)

    @cached_property
    def _lam_sin(self) -> np.ndarray:
        return self.laplacian_symbol(Parity.SINE)

    def lam(self, parity: Parity) -> np.ndarray:
        return self._lam_cos if parity is Parity.COSINE else self._lam_sin

    def dealias_mask(self, parity: Parity) -> np.ndarray:
        """2/3-rule mask: keep |k| <= nx/3 and n <= 2*ny/3."""
        keep_k = np.abs(self.k_index) <= self.nx // 3
        n = np.arange(self.ny + 1) if parity is Parity.COSINE else np.arange(1, self.ny + 1)
        keep_n = n <= (2 * self.ny) // 3
        return keep_k[:, None] & keep_n[None, :]

    @cached_property
    def _mask_cos(self) -> np.ndarray:
        return self.dealias_mask(Parity.COSINE)

    @cached_property
    def _mask_sin(self) -> np.ndarray:
        return self.dealias_mask(Parity.SINE)

    def mask(self, parity: Parity) -> np.ndarray:
        return self._mask_cos if parity is Parity.COSINE else self._mask_sin


@dataclass(frozen=True)
class SpectralField:
    """Scalar field in coefficient space, indexed (k, n) with k in FFT order."""

    grid: Grid
    parity: Parity
    coeffs: np.ndarray

    def __post_init__(self):
        expected = (self.grid.nx, self.grid.modes(self.parity))
        if self.coeffs.shape != expected:
            raise ValueError(f"coefficient shape {self.coeffs.shape} != {expected}")

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, self.parity, coeffs)


@dataclass(frozen=True)
class RealField:
    """Scalar field on the collocation mesh, shape (nx, ny+1)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        expected = (self.grid.nx, self.grid.ny + 1)
        if self.values.shape != expected:
            raise ValueError(f"value shape {self.values.shape} != {expected}")


def zero_field(grid: Grid, parity: Parity) -> SpectralField:
    return SpectralField(grid, parity, np.zeros((grid.nx, grid.modes(parity)), dtype=complex))


def _check_finite(values: np.ndarray, what: str):
    if not np.all(np.isfinite(values)):
        idx = np.argwhere(~np.isfinite(values))[0]
        raise ValueError(f"non-finite {what} at index {tuple(int(i) for i in idx)}")


def to_spectral(f: RealField, parity: Parity) -> SpectralField:
    """Fourier-x x sine/cosine-y analysis of mesh values.

    For SINE parity the top mode n = ny is invisible on this mesh
    (sin(ny*pi*j/ny) = 0 at every node) and its coefficient is set to zero.
    """
    _check_finite(f.values, "input value")
    grid = f.grid
    cx = np.fft.fft(f.values, axis=0) / grid.nx
    if parity is Parity.SINE:
        out = np.zeros((grid.nx, grid.ny), dtype=complex)
        out[:, : grid.ny - 1] = _fft.dst(cx[:, 1:-1], type=1, axis=1) / grid.ny
    else:
        out = _fft.dct(cx, type=1, axis=1) / grid.ny
        out[:, 0] *= 0.5
        out[:, -1] *= 0.5
    return SpectralField(grid, parity, out)


def to_physical(F: SpectralField) -> RealField:
    """Evaluate the expansion on the collocation mesh (inverse of
    :func:`to_spectral` for band-limited fields)."""
    _check_finite(F.coeffs, "coefficient")
    grid = F.grid
    if F.parity is Parity.SINE:
        vals = np.zeros((grid.nx, grid.ny + 1), dtype=complex)
        vals[:, 1:-1] = _fft.dst(F.coeffs[:, : grid.ny - 1], type=1, axis=1) / 2.0
    else:
        tmp = F.coeffs.copy()
        tmp[:, 0] *= 2.0
        tmp[:, -1] *= 2.0
        vals = _fft.dct(tmp, type=1, axis=1) / 2.0
    phys = np.fft.ifft(vals, axis=0) * grid.nx
    return RealField(grid, np.ascontiguousarray(phys.real))


def ddx(F: SpectralField) -> SpectralField:
    """d/dx: multiplies mode (k, n) by i*2*pi*k; parity preserved."""
    return F.with_coeffs(1j * F.grid.kx[:, None] * F.coeffs)


def ddy(F: SpectralField) -> SpectralField:
    """d/dy: SINE mode n -> COSINE mode n with factor n*pi, COSINE mode n ->
    SINE mode n with factor -n*pi; parity flips."""
    grid = F.grid
    nsin = np.arange(1, grid.ny + 1)
    if F.parity is Parity.SINE:
        out = np.zeros((grid.nx, grid.ny + 1), dtype=complex)
        out[:, 1:] = (np.pi * nsin)[None, :] * F.coeffs
        return SpectralField(grid, Parity.COSINE, out)
    out = -(np.pi * nsin)[None, :] * F.coeffs[:, 1:]
    return SpectralField(grid, Parity.SINE, np.ascontiguousarray(out))


def laplacian(F: SpectralField) -> SpectralField:
    """Multiplies mode (k, n) by -((2*pi*k)^2 + (n*pi)^2); parity preserved."""
    return F.with_coeffs(-F.grid.lam(F.parity) * F.coeffs)


def dealias(F: SpectralField) -> SpectralField:
    return F.with_coeffs(F.coeffs * F.grid.mask(F.parity))


def parseval_weights(grid: Grid, parity: Parity) -> np.ndarray:
    """Continuum L2 weights of the basis functions: 1 for the cosine n=0 mode
    and 1/2 otherwise (per unit x wavenumber slot)."""
    if parity is Parity.COSINE:
        w = np.full(grid.ny + 1, 0.5)
        w[0] = 1.0
        return w
    return np.full(grid.ny, 0.5)


def sobolev_norm(F: SpectralField, s: int) -> float:
    """Equivalent H^s norm via mode multipliers lambda^{s/2} (s = 0 is the
    plain L2 norm by Parseval; s >= 1 are the seminorm-based equivalents
    matching |grad f| and |Delta f|)."""
    if not isinstance(s, (int, np.integer)) or s < 0 or s > 3:
        raise ValueError(f"Sobolev order must be an integer in 0..3, got {s}")
    w = parseval_weights(F.grid, F.parity)
    lam = F.grid.lam(F.parity)
    mag2 = (F.coeffs.real ** 2 + F.coeffs.imag ** 2) * w[None, :]
    if s > 0:
        mag2 = mag2 * lam ** s
    return float(np.sqrt(mag2.sum()))


def norm_lp(f: RealField, p) -> float:
    """Quadrature L^p norm on the mesh; p = inf returns the mesh max."""
    _check_finite(f.values, "input value")
    if p == np.inf or p == float("inf"):
        return float(np.abs(f.values).max())
    p = float(p)
    if p < 1.0:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    return _kernels.pnorm_pow(f.values, f.grid.wy, p) ** (1.0 / p)


def inner_product(f: RealField, g: RealField) -> float:
    """Quadrature of the L2 pairing of two mesh fields."""
    if f.grid != g.grid:
        raise ValueError("inner_product requires fields on the same grid")
    return _kernels.quad_inner(f.values, g.values, f.grid.wy)


def hermitian_defect(F: SpectralField) -> float:
    """Max deviation from the Hermitian symmetry c(-k) = conj(c(k))."""
    flipped = np.conj(np.roll(F.coeffs[::-1], 1, axis=0))
    return float(np.abs(F.coeffs - flipped).max())


def random_band_limited(
    grid: Grid,
    parity: Parity,
    seed: int,
    sigma: float = 3.0,
    kmax_frac: float = 1.0 / 3.0,
) -> SpectralField:
    """Seeded random real-valued field with spectrum exp(-(k^2+n^2)/(2 sigma^2)),
    supported strictly inside the dealias band (counter-based Philox stream)."""
    rng = np.random.Generator(np.random.Philox(seed))
    nmodes = grid.modes(parity)
    raw = rng.normal(size=(grid.nx, nmodes)) + 1j * rng.normal(size=(grid.nx, nmodes))
    k = grid.k_index[:, None]
    n = (np.arange(nmodes) if parity is Parity.COSINE else np.arange(1, nmodes + 1))[None, :]
    shape = np.exp(-(k ** 2 + n ** 2) / (2.0 * sigma ** 2))
    keep = (np.abs(k) <= int(grid.nx * kmax_frac)) & (n <= int(2 * grid.ny * kmax_frac))
    coeffs = raw * shape * keep
    # symmetrize so the field is real valued
    flipped = np.conj(np.roll(coeffs[::-1], 1, axis=0))
    coeffs = 0.5 * (coeffs + flipped)
    nyq = grid.nx // 2
    coeffs[nyq] = coeffs[nyq].real
    return SpectralField(grid, parity, coeffs)
