"""Pointwise symplectic linear algebra of 2-forms on rank-4 grids.

A 2-form is stored by its six components in the orthonormal coframe,
ordered lexicographically by axis pair.  The Hodge star, self-dual /
anti-self-dual split, volume potential u, the eigenvalue fields of the
associated skew matrix, the symmetric matrices a, b and the flow weight
matrix h are all pointwise operations on those components.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateForm, NumericalBlowup
from .grid import PeriodicGrid, ScalarField

# lexicographic (i, j) pairs, i < j, for the six components
COMPONENT_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
PAIR_INDEX = {pair: n for n, pair in enumerate(COMPONENT_PAIRS)}

SQRT2 = np.sqrt(2.0)

# Guard for the closed-form matrix square root of b.
EIG_EPS = 1e-12

DEFAULT_U_FLOOR = 1e-6


@dataclass
class TwoForm:
    """Six component fields of a 2-form on a shared rank-4 grid."""

    grid: PeriodicGrid
    comps: np.ndarray  # shape (6, *grid.dims)

    def __post_init__(self):
        self.comps = np.asarray(self.comps, dtype=float)
        if self.grid.rank != 4:
            raise ValueError("TwoForm requires a rank-4 grid")
        if self.comps.shape != (6,) + self.grid.dims:
            raise ValueError(f"component array has shape {self.comps.shape}, "
                             f"expected {(6,) + self.grid.dims}")

    @classmethod
    def zero(cls, grid: PeriodicGrid) -> "TwoForm":
        return cls(grid, np.zeros((6,) + grid.dims))

    def component(self, i: int, j: int) -> np.ndarray:
        """Entry rho_ij with antisymmetry applied for i > j."""
        if i == j:
            return np.zeros(self.grid.dims)
        if i < j:
            return self.comps[PAIR_INDEX[(i, j)]]
        return -self.comps[PAIR_INDEX[(j, i)]]

    def copy(self) -> "TwoForm":
        return TwoForm(self.grid, self.comps.copy())

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.comps)):
            raise NumericalBlowup("non-finite values in TwoForm")

    def __add__(self, other: "TwoForm") -> "TwoForm":
        return TwoForm(self.grid, self.comps + other.comps)

    def __sub__(self, other: "TwoForm") -> "TwoForm":
        return TwoForm(self.grid, self.comps - other.comps)

    def __mul__(self, c: float) -> "TwoForm":
        return TwoForm(self.grid, self.comps * c)

    __rmul__ = __mul__


@dataclass
class SymMatrixField:
    """Symmetric 4x4 matrix per grid point, stored as a full (4,4,...) array."""

    grid: PeriodicGrid
    entries: np.ndarray  # shape (4, 4, *grid.dims), symmetric in the first two axes

    @classmethod
    def identity(cls, grid: PeriodicGrid) -> "SymMatrixField":
        e = np.zeros((4, 4) + grid.dims)
        for i in range(4):
            e[i, i] = 1.0
        return cls(grid, e)

    @classmethod
    def scalar(cls, grid: PeriodicGrid, factor: np.ndarray) -> "SymMatrixField":
        e = np.zeros((4, 4) + grid.dims)
        for i in range(4):
            e[i, i] = factor
        return cls(grid, e)


@dataclass(frozen=True)
class FlowScheme:
    """Choice of the positive symmetric weight matrix h in the flow.

    kind        h
    ----------  ----------------------
    linear      identity
    power_u     u^(-r) * identity      (r = 1/2 is the conformal flow)
    norm_ratio  (|rho|^2 / u) * identity
    matrix_a1   a / u
    matrix_a2   a / u^2
    matrix_b1   b / u
    matrix_b2   b / u^2
    matrix_bh   sqrt(b) / u
    """

    kind: str
    r: Optional[float] = None

    _KINDS = ("linear", "power_u", "norm_ratio", "matrix_a1", "matrix_a2",
              "matrix_b1", "matrix_b2", "matrix_bh")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "power_u":
            if self.r is None or self.r <= 0:
                raise ValueError("power_u scheme needs an exponent r > 0")
        elif self.r is not None:
            raise ValueError(f"scheme {self.kind!r} takes no exponent")

    @property
    def is_scalar(self) -> bool:
        return self.kind in ("linear", "power_u", "norm_ratio")

    @property
    def needs_positive_u(self) -> bool:
        return self.kind != "linear"


LINEAR = FlowScheme("linear")
CONFORMAL = FlowScheme("power_u", 0.5)
NORM_RATIO = FlowScheme("norm_ratio")
MATRIX_A1 = FlowScheme("matrix_a1")
MATRIX_A2 = FlowScheme("matrix_a2")
MATRIX_B1 = FlowScheme("matrix_b1")
MATRIX_B2 = FlowScheme("matrix_b2")
MATRIX_BHALF = FlowScheme("matrix_bh")

ALL_SCHEMES = (LINEAR, CONFORMAL, NORM_RATIO, MATRIX_A1, MATRIX_A2,
               MATRIX_B1, MATRIX_B2, MATRIX_BHALF)


def scheme_from_name(name: str) -> FlowScheme:
    """Parse a scheme tag like 'conformal', 'linear', 'power_u:0.25', 'matrix_b2'."""
    name = name.strip().lower()
    if name == "conformal":
        return CONFORMAL
    if name.startswith("power_u"):
        _, _, arg = name.partition(":")
        return FlowScheme("power_u", float(arg) if arg else 0.5)
    return FlowScheme(name)


def omega(grid: PeriodicGrid) -> TwoForm:
    """The standard symplectic form: rho_12 = rho_34 = 1, others zero."""
    w = TwoForm.zero(grid)
    w.comps[PAIR_INDEX[(0, 1)]] = 1.0
    w.comps[PAIR_INDEX[(2, 3)]] = 1.0
    return w


def hodge_star(rho: TwoForm) -> TwoForm:
    """Hodge star of the flat metric: an isometric involution on 2-forms."""
    c = rho.comps
    starred = np.stack([c[5], -c[4], c[3], c[2], -c[1], c[0]])
    return TwoForm(rho.grid, starred)


def sd_asd_split(rho: TwoForm):
    """Self-dual and anti-self-dual parts (rho = rho_plus + rho_minus)."""
    star = hodge_star(rho)
    plus = TwoForm(rho.grid, 0.5 * (rho.comps + star.comps))
    minus = TwoForm(rho.grid, 0.5 * (rho.comps - star.comps))
    return plus, minus


def norm_sq_values(rho: TwoForm) -> np.ndarray:
    """|rho|^2 = sum over i<j of rho_ij^2, pointwise."""
    return np.einsum("c...,c...->...", rho.comps, rho.comps)


def norm_sq(rho: TwoForm) -> ScalarField:
    return ScalarField(rho.grid, norm_sq_values(rho))


def volume_potential_values(rho: TwoForm) -> np.ndarray:
    c = rho.comps
    return c[0] * c[5] - c[1] * c[4] + c[2] * c[3]


def volume_potential(rho: TwoForm) -> ScalarField:
    """u = rho_12 rho_34 - rho_13 rho_24 + rho_14 rho_23; 2u = <rho, *rho>."""
    return ScalarField(rho.grid, volume_potential_values(rho))


def eigenvalue_values(rho: TwoForm):
    """(lambda1, lambda2) as arrays, from the norms of the SD/ASD parts."""
    plus, minus = sd_asd_split(rho)
    sp = np.sqrt(norm_sq_values(plus))
    sm = np.sqrt(norm_sq_values(minus))
    return (sp + sm) / SQRT2, (sp - sm) / SQRT2


def eigenvalues(rho: TwoForm):
    """lambda1 >= |lambda2| pointwise; lambda1*lambda2 = u and
    lambda1^2 + lambda2^2 = |rho|^2."""
    lam1, lam2 = eigenvalue_values(rho)
    return ScalarField(rho.grid, lam1), ScalarField(rho.grid, lam2)


def as_skew_matrix(rho: TwoForm) -> np.ndarray:
    """The antisymmetric matrix A with rho = g(A., .), shape (4, 4, *dims)."""
    A = np.zeros((4, 4) + rho.grid.dims)
    for n, (i, j) in enumerate(COMPONENT_PAIRS):
        A[i, j] = rho.comps[n]
        A[j, i] = -rho.comps[n]
    return A


def matrix_ab(rho: TwoForm):
    """a_ij = rho_ip rho_jp and b_ij = (*rho)_ip (*rho)_jp.

    Both are symmetric positive semidefinite with eigenvalues
    {lambda1^2, lambda1^2, lambda2^2, lambda2^2} and a + b = |rho|^2 I.
    """
    A = as_skew_matrix(rho)
    B = as_skew_matrix(hodge_star(rho))
    a = np.einsum("ip...,jp...->ij...", A, A)
    b = np.einsum("ip...,jp...->ij...", B, B)
    return SymMatrixField(rho.grid, a), SymMatrixField(rho.grid, b)


def sqrt_b_values(rho: TwoForm) -> np.ndarray:
    """Matrix square root of b via the closed form (u I + b) / (lambda1 + lambda2).

    Well-defined at lambda1 = lambda2; the division is guarded below a tiny
    eigenvalue threshold.
    """
    _, b = matrix_ab(rho)
    u = volume_potential_values(rho)
    lam1, lam2 = eigenvalue_values(rho)
    trace = np.maximum(lam1 + lam2, EIG_EPS)
    out = b.entries.copy()
    for i in range(4):
        out[i, i] += u
    out /= trace
    return out


def _require_nondegenerate(u: np.ndarray, u_floor: float, what: str) -> None:
    m = float(u.min())
    if m <= u_floor:
        raise DegenerateForm(f"min u = {m:.6g} <= floor {u_floor:.3g} in {what}")


def scalar_weight_values(rho: TwoForm, scheme: FlowScheme,
                         u_floor: float = DEFAULT_U_FLOOR) -> np.ndarray:
    """Pointwise conformal factor for the scalar schemes."""
    if scheme.kind == "linear":
        return np.ones(rho.grid.dims)
    u = volume_potential_values(rho)
    _require_nondegenerate(u, u_floor, f"weight for scheme {scheme.kind}")
    if scheme.kind == "power_u":
        return u ** (-scheme.r)
    if scheme.kind == "norm_ratio":
        return norm_sq_values(rho) / u
    raise ValueError(f"scheme {scheme.kind!r} is not scalar")


def weight_h(rho: TwoForm, scheme: FlowScheme,
             u_floor: float = DEFAULT_U_FLOOR) -> SymMatrixField:
    """Realized weight matrix h for a scheme; positive definite where u > 0."""
    if scheme.is_scalar:
        return SymMatrixField.scalar(rho.grid, scalar_weight_values(rho, scheme, u_floor))
    u = volume_potential_values(rho)
    _require_nondegenerate(u, u_floor, f"weight for scheme {scheme.kind}")
    if scheme.kind == "matrix_bh":
        return SymMatrixField(rho.grid, sqrt_b_values(rho) / u)
    a, b = matrix_ab(rho)
    base = a.entries if scheme.kind in ("matrix_a1", "matrix_a2") else b.entries
    power = 1 if scheme.kind in ("matrix_a1", "matrix_b1") else 2
    return SymMatrixField(rho.grid, base / u ** power)


def weight_spectral_radius(rho: TwoForm, scheme: FlowScheme,
                           u_floor: float = DEFAULT_U_FLOOR) -> np.ndarray:
    """Pointwise largest eigenvalue of h, from the closed-form spectrum.

    a and b both have eigenvalues {lambda1^2, lambda2^2} (doubled), so every
    scheme's h has a spectrum expressible in lambda1, lambda2, u.
    """
    if scheme.is_scalar:
        return scalar_weight_values(rho, scheme, u_floor)
    u = volume_potential_values(rho)
    _require_nondegenerate(u, u_floor, f"spectral radius for scheme {scheme.kind}")
    lam1, _ = eigenvalue_values(rho)
    if scheme.kind in ("matrix_a1", "matrix_b1"):
        return lam1 ** 2 / u
    if scheme.kind in ("matrix_a2", "matrix_b2"):
        return lam1 ** 2 / u ** 2
    return lam1 / u  # matrix_bh
