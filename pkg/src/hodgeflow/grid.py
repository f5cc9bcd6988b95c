"""Periodic uniform grids and pseudo-spectral differentiation.

All differential operators in the package go through this module: derivatives
are computed by FFT, multiplication by i*k, and inverse FFT, so that d∘d = 0
and adjointness of d and its formal adjoint hold to machine precision.  The
Nyquist mode's first-derivative weight is zeroed (symmetric convention) so
real fields map to real fields.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBlowup

TWO_PI = 2.0 * np.pi


@functools.lru_cache(maxsize=None)
def _derivative_wavenumbers(n: int, length: float) -> np.ndarray:
    """First-derivative wavenumbers 2*pi*k/L with the Nyquist entry zeroed."""
    k = np.fft.fftfreq(n, d=1.0 / n) * (TWO_PI / length)
    k = k.copy()
    k[n // 2] = 0.0
    k.setflags(write=False)
    return k


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic lattice in 1, 2, or 4 dimensions.

    dims are per-axis point counts (even, >= 8); lengths are the periods
    (default 2*pi on every axis).
    """

    dims: tuple[int, ...]
    lengths: tuple[float, ...] = field(default=())

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) not in (1, 2, 4):
            raise ValueError(f"grid rank must be 1, 2, or 4, got {len(dims)}")
        for n in dims:
            if n < 8 or n % 2 != 0:
                raise ValueError(f"each axis needs an even point count >= 8, got {n}")
        lengths = tuple(float(L) for L in self.lengths) or (TWO_PI,) * len(dims)
        if len(lengths) != len(dims):
            raise ValueError("lengths and dims must have the same rank")
        if any(L <= 0 for L in lengths):
            raise ValueError("periods must be positive")
        object.__setattr__(self, "lengths", lengths)

    @property
    def rank(self) -> int:
        return len(self.dims)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.dims))

    @property
    def num_points(self) -> int:
        return int(np.prod(self.dims))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def wavenumbers(self, axis: int) -> np.ndarray:
        return _derivative_wavenumbers(self.dims[axis], self.lengths[axis])

    def axis_coordinates(self, axis: int) -> np.ndarray:
        n, L = self.dims[axis], self.lengths[axis]
        return np.arange(n) * (L / n)

    def coordinates(self):
        """Sparse broadcastable coordinate arrays, one per axis."""
        return np.meshgrid(*(self.axis_coordinates(a) for a in range(self.rank)),
                           indexing="ij", sparse=True)


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalBlowup(f"non-finite values in {what}")


def deriv_values(values: np.ndarray, grid: PeriodicGrid, axis: int) -> np.ndarray:
    """Spectral partial derivative along a grid axis.

    `values` may carry leading component axes; the grid axes are the trailing
    `grid.rank` axes of the array.
    """
    arr_axis = values.ndim - grid.rank + axis
    k = grid.wavenumbers(axis)
    shape = [1] * values.ndim
    shape[arr_axis] = len(k)
    spec = np.fft.fft(values, axis=arr_axis)
    spec *= (1j * k).reshape(shape)
    return np.fft.ifft(spec, axis=arr_axis).real


def laplacian_values(values: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Sum of repeated spectral partials over all axes (one FFT round-trip)."""
    offset = values.ndim - grid.rank
    grid_axes = tuple(range(offset, values.ndim))
    spec = np.fft.fftn(values, axes=grid_axes)
    total = np.zeros(values.shape[offset:], dtype=float)
    for axis in range(grid.rank):
        # full -k^2 symbol: unlike the first derivative, the Laplacian keeps
        # its (real, even) Nyquist mode
        n, length = grid.dims[axis], grid.lengths[axis]
        k = np.fft.fftfreq(n, 1.0 / n) * (2.0 * np.pi / length)
        shape = [1] * grid.rank
        shape[axis] = n
        total = total - (k ** 2).reshape(shape)
    spec *= total.reshape((1,) * offset + total.shape)
    return np.fft.ifftn(spec, axes=grid_axes).real


@dataclass
class ScalarField:
    """Real values sampled on a PeriodicGrid (axis-last-fastest layout)."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.dims:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid dims {self.grid.dims}")

    @classmethod
    def constant(cls, grid: PeriodicGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.dims, float(value)))

    @classmethod
    def from_function(cls, grid: PeriodicGrid, func) -> "ScalarField":
        return cls(grid, np.asarray(func(*grid.coordinates()), dtype=float)
                   * np.ones(grid.dims))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def mean(self) -> float:
        return float(self.values.mean())


def spectral_partial(f: ScalarField, axis: int) -> ScalarField:
    """Exact derivative of the trigonometric interpolant along one axis."""
    if axis >= f.grid.rank:
        raise ValueError(f"axis {axis} out of range for rank-{f.grid.rank} grid")
    _check_finite(f.values, "spectral_partial input")
    out = deriv_values(f.values, f.grid, axis)
    _check_finite(out, "spectral_partial output")
    return ScalarField(f.grid, out)


def laplacian(f: ScalarField) -> ScalarField:
    _check_finite(f.values, "laplacian input")
    out = laplacian_values(f.values, f.grid)
    _check_finite(out, "laplacian output")
    return ScalarField(f.grid, out)


def integrate(f: ScalarField) -> float:
    """Integral over the torus: mean value times the total volume."""
    return float(f.values.mean() * f.grid.volume)
