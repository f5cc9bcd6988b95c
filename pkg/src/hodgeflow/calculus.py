"""Discrete exterior calculus on the flat four-torus.

Sign conventions, fixed once and used everywhere:

  (d zeta)_ij   = d_i zeta_j - d_j zeta_i
  (d rho)_ijk   = d_i rho_jk - d_j rho_ik + d_k rho_ij
  (d* rho)_k    = sum_l d_l rho_kl        (rho the full antisymmetric matrix)

With these choices d and d* are exact adjoints for the L2 pairings used in
this package, and the assembled flows dissipate the Hodge energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalBlowup
from .forms import COMPONENT_PAIRS, PAIR_INDEX, TwoForm
from .grid import PeriodicGrid, ScalarField, deriv_values


@dataclass
class OneForm:
    """Four component fields zeta_1..zeta_4 on a shared rank-4 grid."""

    grid: PeriodicGrid
    comps: np.ndarray  # shape (4, *dims)

    def __post_init__(self):
        self.comps = np.asarray(self.comps, dtype=float)
        if self.comps.shape != (4,) + self.grid.dims:
            raise ValueError("OneForm needs four components on the grid")

    @classmethod
    def zero(cls, grid: PeriodicGrid) -> "OneForm":
        return cls(grid, np.zeros((4,) + grid.dims))


@dataclass
class ThreeForm:
    """Components indexed by the omitted axis: comps[m] is the coefficient of
    the increasing triple that leaves out axis m."""

    grid: PeriodicGrid
    comps: np.ndarray  # shape (4, *dims)


def _check(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalBlowup(f"non-finite values in {what}")


def d_one(zeta: OneForm) -> TwoForm:
    """Exterior derivative of a 1-form."""
    _check(zeta.comps, "d_one input")
    grid = zeta.grid
    # D[i] holds d_i of every component
    D = np.stack([deriv_values(zeta.comps, grid, i) for i in range(4)])
    out = np.stack([D[i, j] - D[j, i] for (i, j) in COMPONENT_PAIRS])
    _check(out, "d_one output")
    return TwoForm(grid, out)


def d_two(rho: TwoForm) -> ThreeForm:
    """Exterior derivative of a 2-form, stored by omitted axis."""
    _check(rho.comps, "d_two input")
    grid = rho.grid
    D = np.stack([deriv_values(rho.comps, grid, i) for i in range(4)])

    def dcomp(i, j, k):
        return (D[i, PAIR_INDEX[(j, k)]] - D[j, PAIR_INDEX[(i, k)]]
                + D[k, PAIR_INDEX[(i, j)]])

    out = np.stack([dcomp(1, 2, 3), dcomp(0, 2, 3), dcomp(0, 1, 3), dcomp(0, 1, 2)])
    _check(out, "d_two output")
    return ThreeForm(grid, out)


def codiff_two(rho: TwoForm) -> OneForm:
    """Formal adjoint of d on 2-forms: (d* rho)_k = sum_l d_l rho_kl."""
    _check(rho.comps, "codiff_two input")
    grid = rho.grid
    out = np.zeros((4,) + grid.dims)
    for k in range(4):
        for l in range(4):
            if l == k:
                continue
            out[k] += deriv_values(rho.component(k, l), grid, l)
    _check(out, "codiff_two output")
    return OneForm(grid, out)


def star_three(theta: ThreeForm) -> OneForm:
    """Hodge star mapping 3-forms to 1-forms on the flat torus."""
    sign = np.array([-1.0, 1.0, -1.0, 1.0]).reshape((4,) + (1,) * theta.grid.rank)
    return OneForm(theta.grid, sign * theta.comps)


def max_abs_three(theta: ThreeForm) -> float:
    return float(np.abs(theta.comps).max())


def periods(rho: TwoForm) -> np.ndarray:
    """Integrals of rho over the six coordinate 2-tori, in component order.

    Invariant under adding exact forms, so these detect the cohomology class.
    """
    L = rho.grid.lengths
    means = rho.comps.reshape(6, -1).mean(axis=1)
    areas = np.array([L[i] * L[j] for (i, j) in COMPONENT_PAIRS])
    return means * areas


def grad_norm_sq(rho: TwoForm) -> ScalarField:
    """|grad rho|^2: squared spectral partials summed over axes and components."""
    _check(rho.comps, "grad_norm_sq input")
    total = np.zeros(rho.grid.dims)
    for i in range(4):
        D = deriv_values(rho.comps, rho.grid, i)
        total += np.einsum("c...,c...->...", D, D)
    return ScalarField(rho.grid, total)


def one_form_pointwise_inner(x: OneForm, y: OneForm) -> np.ndarray:
    return np.einsum("c...,c...->...", x.comps, y.comps)


def two_form_pointwise_inner(x: TwoForm, y: TwoForm) -> np.ndarray:
    return np.einsum("c...,c...->...", x.comps, y.comps)
