"""Constructors for initial data and scripted experiments.

Everything returned here is closed to machine precision (perturbations are
built through the exterior derivative) and, except for the degeneracy
counterexample run past its breakdown time, nondegenerate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import calculus, forms, reduced
from .calculus import OneForm
from .errors import CohomologyMismatch, DegenerateForm
from .forms import DEFAULT_U_FLOOR, TwoForm
from .grid import PeriodicGrid, ScalarField

TWO_PI = 2.0 * np.pi


def make_omega(grid: PeriodicGrid) -> TwoForm:
    return forms.omega(grid)


def make_product_vw(v: ScalarField, w: ScalarField,
                    u_floor: float = DEFAULT_U_FLOOR) -> TwoForm:
    """v(x1,x2) dx1^dx2 + w(x3,x4) dx3^dx4; u = v*w pointwise."""
    rho = reduced.embed_product_vw(v, w)
    u = forms.volume_potential_values(rho)
    if float(u.min()) <= u_floor:
        raise DegenerateForm(f"min v*w = {u.min():.6g} at/below the floor")
    return rho


def _band_limited_field(rng: np.random.Generator, grid: PeriodicGrid,
                        band: int) -> np.ndarray:
    """Seeded random real field with all wavenumbers <= band in magnitude.

    Modes with |k|^2 <= 1 are removed as well, so exact perturbations built
    from these fields sit strictly inside the spectral gap and decay at least
    like e^{-2t} under the linearized flows.
    """
    spec = np.fft.fftn(rng.standard_normal(grid.dims))
    ksq = np.zeros(grid.dims)
    for axis in range(grid.rank):
        k = np.fft.fftfreq(grid.dims[axis], 1.0 / grid.dims[axis])
        shape = [1] * grid.rank
        shape[axis] = grid.dims[axis]
        spec = spec * (np.abs(k) <= band).reshape(shape)
        ksq = ksq + (k ** 2).reshape(shape)
    spec = spec * (ksq > 1.0)
    return np.fft.ifftn(spec).real


def make_random_near_omega(grid: PeriodicGrid, eps: float, band: int = 4,
                           seed: int = 0) -> TwoForm:
    """omega + d(zeta) for a seeded band-limited 1-form, scaled so the
    perturbation has sup norm eps; re-scaled down if u would dip below 1/2."""
    if eps == 0.0:
        return forms.omega(grid)
    rng = np.random.default_rng(seed)
    zeta = OneForm(grid, np.stack([_band_limited_field(rng, grid, band)
                                   for _ in range(4)]))
    dzeta = calculus.d_one(zeta)
    scale = eps / float(np.abs(dzeta.comps).max())
    while True:
        rho = TwoForm(grid, forms.omega(grid).comps + scale * dzeta.comps)
        if float(forms.volume_potential_values(rho).min()) > 0.5:
            return rho
        scale *= 0.5


def isotopy_path(theta: OneForm, s: float,
                 u_floor: float = DEFAULT_U_FLOOR) -> TwoForm:
    """omega + s * d(theta) for s in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("path parameter s must lie in [0, 1]")
    rho = TwoForm(theta.grid,
                  forms.omega(theta.grid).comps + s * calculus.d_one(theta).comps)
    u = forms.volume_potential_values(rho)
    if float(u.min()) <= u_floor:
        raise DegenerateForm(f"path degenerates at s = {s}: min u = {u.min():.6g}")
    return rho


def isotopy_min_u(theta: OneForm, samples: int = 11) -> np.ndarray:
    """min u along the sampled path s = 0 .. 1."""
    out = []
    for s in np.linspace(0.0, 1.0, samples):
        rho = TwoForm(theta.grid,
                      forms.omega(theta.grid).comps + s * calculus.d_one(theta).comps)
        out.append(float(forms.volume_potential_values(rho).min()))
    return np.array(out)


# ---------------------------------------------------------------------------
# the degeneracy counterexample for the unweighted flow


def _sample_f0(grid1d: PeriodicGrid) -> np.ndarray:
    """Profile vanishing on the first half circle, sin(2x) on the second."""
    x = grid1d.axis_coordinates(0)
    return np.where(x >= np.pi, np.sin(2.0 * x), 0.0)


def _sample_h0(grid1d: PeriodicGrid) -> np.ndarray:
    """The complementary profile: sin(2x) on [0, pi), zero after."""
    x = grid1d.axis_coordinates(0)
    return np.where(x < np.pi, np.sin(2.0 * x), 0.0)


def _heat_kernel_1d(values: np.ndarray, grid1d: PeriodicGrid, t: float) -> np.ndarray:
    k = np.fft.fftfreq(grid1d.dims[0], 1.0 / grid1d.dims[0]) \
        * (TWO_PI / grid1d.lengths[0])
    return np.fft.ifft(np.fft.fft(values) * np.exp(-k ** 2 * t)).real


def _antiderivative_1d(values: np.ndarray, grid1d: PeriodicGrid) -> np.ndarray:
    """Mean-zero spectral antiderivative (input must be mean- and Nyquist-free)."""
    n = grid1d.dims[0]
    k = np.fft.fftfreq(n, 1.0 / n) * (TWO_PI / grid1d.lengths[0])
    spec = np.fft.fft(values)
    with np.errstate(divide="ignore", invalid="ignore"):
        anti = np.where(k != 0, spec / (1j * np.where(k != 0, k, 1.0)), 0.0)
    anti[0] = 0.0
    anti[n // 2] = 0.0
    return np.fft.ifft(anti).real


_PROFILE_CACHE: dict = {}


def counterexample_profiles(grid1d: PeriodicGrid, t: float,
                            use_solver: bool = True):
    """The two heat-evolved profiles at time t, as ScalarFields.

    The default path marches the reduced heat model; the spectral heat
    kernel (exact for the interpolant) is available for cross-checks.
    Results are memoized (the march to t = 1 on a fine circle is the
    expensive part of the degeneracy scenario).
    """
    key = (grid1d.dims, grid1d.lengths, float(t), bool(use_solver))
    if key in _PROFILE_CACHE:
        return _PROFILE_CACHE[key]
    out = _counterexample_profiles(grid1d, t, use_solver)
    _PROFILE_CACHE[key] = out
    return out


def _counterexample_profiles(grid1d: PeriodicGrid, t: float, use_solver: bool):
    f0 = _sample_f0(grid1d)
    h0 = _sample_h0(grid1d)
    if t == 0.0:
        return ScalarField(grid1d, f0), ScalarField(grid1d, h0)
    if not use_solver:
        return (ScalarField(grid1d, _heat_kernel_1d(f0, grid1d, t)),
                ScalarField(grid1d, _heat_kernel_1d(h0, grid1d, t)))
    out = []
    for v0 in (f0, h0):
        state = reduced.ReducedState("heat", (ScalarField(grid1d, v0),))
        _, final, event = reduced.run_reduced(state, t, sample_every=t)
        if event is not None:
            raise RuntimeError("heat marching failed")  # pragma: no cover
        out.append(final.fields[0])
    return tuple(out)


def counterexample_series(terms: int = 200):
    """Exact Fourier data of the two profiles: (sin-2 weight, cos-k weights).

    profile(x, t) = w2 e^{-4t} sin 2x + sum_k c_k e^{-k^2 t} cos kx with
    c_k = 4 / (pi (k^2 - 4)) over odd k; the complementary profile flips the
    sign of every odd cosine weight.
    """
    ks = np.arange(1, terms + 1, 2)
    return 0.5, ks, 4.0 / (np.pi * (ks ** 2 - 4.0))


def counterexample_profile_oracle(x: np.ndarray, t: float, shifted: bool,
                                  terms: int = 200) -> np.ndarray:
    w2, ks, cs = counterexample_series(terms)
    sign = -1.0 if shifted else 1.0
    out = w2 * np.exp(-4.0 * t) * np.sin(2.0 * x)
    out = out + sign * np.einsum(
        "k,kx->x", cs * np.exp(-ks.astype(float) ** 2 * t),
        np.cos(np.outer(ks, x)))
    return out


@dataclass
class CounterexampleScenario:
    """Shear data whose unweighted flow drives u negative in finite time.

    u(x, y, t) = 1 - f(x,t) h(x,t) c(y,t) with f, h heat-evolved profiles of
    disjoint support (so u = 1 exactly at t = 0) and c(y,t) = A0 e^{-t} sin y.
    The threshold amplitude is 1 / max_x |f(x,1) h(x,1)|: u(., ., 1) dips
    below zero exactly when A0 exceeds e times that.
    """

    grid1d: PeriodicGrid
    A0: float
    threshold: float

    def transverse_profile(self, y: np.ndarray, t: float) -> np.ndarray:
        return self.A0 * np.exp(-t) * np.sin(y)

    def min_u_direct(self, t: float, ny: int = 64) -> float:
        """min over the (x, y) grid of 1 - f h c, straight from the profiles."""
        f, h = counterexample_profiles(self.grid1d, t)
        y = np.arange(ny) * TWO_PI / ny
        u = 1.0 - np.outer(f.values * h.values, self.transverse_profile(y, t))
        return float(u.min())

    def two_form(self, t: float = 0.0, nx: Optional[int] = None, ny: int = 16,
                 dims34=(8, 8)) -> TwoForm:
        """The shear 2-form at time t on an (nx, ny, 8, 8) grid.

        Built as omega + d(a dx3 + b dx4), so it is closed to rounding; the
        sampled profiles have no mean or Nyquist content, which makes
        u(t=0) = 1 exact at the nodes.
        """
        nx = nx or self.grid1d.dims[0]
        gx = PeriodicGrid((nx,))
        f, h = counterexample_profiles(gx, t)
        a_vals = _antiderivative_1d(f.values, gx)
        grid4 = PeriodicGrid((nx, ny) + tuple(dims34))
        y = np.arange(ny) * TWO_PI / ny
        e_vals = -self.A0 * np.exp(-t) * np.cos(y)  # antiderivative of c
        theta = OneForm.zero(grid4)
        theta.comps[2] = a_vals[:, None, None, None]
        theta.comps[3] = (h.values[:, None] * e_vals[None, :])[:, :, None, None]
        return TwoForm(grid4,
                       forms.omega(grid4).comps + calculus.d_one(theta).comps)


def make_example_counterexample(grid1d: PeriodicGrid,
                                A0="auto") -> CounterexampleScenario:
    """Build the scenario; A0 = "auto" picks twice the degeneracy threshold."""
    if grid1d.rank != 1 or grid1d.dims[0] < 512:
        raise ValueError("the counterexample needs a rank-1 grid with >= 512 points")
    f1, h1 = counterexample_profiles(grid1d, 1.0)
    peak = float(np.abs(f1.values * h1.values).max())
    threshold = 1.0 / peak
    if A0 == "auto":
        A0 = 2.0 * threshold * np.e
    return CounterexampleScenario(grid1d=grid1d, A0=float(A0), threshold=threshold)
