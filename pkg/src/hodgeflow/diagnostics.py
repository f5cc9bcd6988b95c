"""Energies, decay fits, monitors, inequality ratios, and residual checks
of the pointwise evolution identities satisfied by |rho|^2, u, |rho+|^2,
|rho-|^2 and the eigenvalue fields along each flow scheme.

The identity checks compare a Gateaux derivative (chain rule on the discrete
fields, no time stepping) against the closed-form right-hand side for the
scheme.  First derivatives of derived quantities (u, |rho|^2, lambda_1, ...)
are assembled pointwise from the exact spectral derivatives of rho itself, so
the only discretization error left in the residuals is aliasing of the
non-polynomial factors, which vanishes at spectral rate under refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from . import calculus, flows, forms
from .errors import BadSeries, CohomologyMismatch, DegenerateForm
from .forms import DEFAULT_U_FLOOR, SQRT2, FlowScheme, TwoForm
from .grid import ScalarField, integrate, laplacian_values

_TINY = 1e-300


@dataclass
class TrajectoryRecord:
    """One diagnostics row; the CSV column order is the field order here."""

    t: float
    dt: float
    E: float
    E0: float
    minU: float
    maxU: float
    meanU: float
    minLambda2: float
    maxLambda1: float
    supGradLogU: float
    Q1: float
    fMax: float
    dRhoResidual: float
    periodDrift: float


CSV_COLUMNS = tuple(f.name for f in dataclass_fields(TrajectoryRecord))


# ---------------------------------------------------------------------------
# energies and scalar diagnostics


def energy(rho: TwoForm) -> float:
    """Hodge energy: integral of |rho|^2."""
    return integrate(forms.norm_sq(rho))


def _require_class_omega(rho: TwoForm, tol: float = 1e-8) -> None:
    drift = calculus.periods(rho) - calculus.periods(forms.omega(rho.grid))
    worst = float(np.abs(drift).max())
    if worst > tol:
        raise CohomologyMismatch(
            f"periods differ from the reference class by {worst:.3g}")


def normalized_energy(rho: TwoForm) -> float:
    """Integral of |rho - omega|^2 for forms in the class of omega."""
    _require_class_omega(rho)
    return integrate(forms.norm_sq(rho - forms.omega(rho.grid)))


def q1_functional(rho: TwoForm, a1: float) -> float:
    """int |d* rho|^2 + a1 * int |rho - omega|^2 (decays along small-data runs)."""
    _require_class_omega(rho)
    xi = calculus.codiff_two(rho)
    coexact = integrate(ScalarField(rho.grid, calculus.one_form_pointwise_inner(xi, xi)))
    return coexact + a1 * normalized_energy(rho)


def decay_rate_fit(series) -> tuple:
    """Least-squares exponential rate of a positive (t, value) series.

    Returns (rate, r_squared) with rate = -slope of log(value) against t.
    """
    pts = list(series)
    if len(pts) < 10:
        raise BadSeries(f"need at least 10 samples, got {len(pts)}")
    t = np.array([p[0] for p in pts], dtype=float)
    v = np.array([p[1] for p in pts], dtype=float)
    if np.any(v <= 0):
        raise BadSeries("series values must all be positive for a log fit")
    logv = np.log(v)
    slope, intercept = np.polyfit(t, logv, 1)
    fit = slope * t + intercept
    ss_res = float(np.sum((logv - fit) ** 2))
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    r_squared = 1.0 if ss_tot < 1e-28 else max(0.0, 1.0 - ss_res / ss_tot)
    return -float(slope), r_squared


def _grad_u_values(rho: TwoForm) -> np.ndarray:
    """Pointwise gradient of u: u_j = <*rho, d_j rho>, shape (4, *dims)."""
    star = forms.hodge_star(rho).comps
    return np.stack([
        np.einsum("c...,c...->...",
                  star, calculus.deriv_values(rho.comps, rho.grid, j))
        for j in range(4)])


def grad_log_u_sup(rho: TwoForm, u_floor: float = DEFAULT_U_FLOOR) -> float:
    """sup over the grid of |grad u| / u."""
    u = forms.volume_potential_values(rho)
    if float(u.min()) <= u_floor:
        raise DegenerateForm(f"min u = {u.min():.6g} at/below floor {u_floor:.3g}")
    grad = _grad_u_values(rho)
    mag = np.sqrt(np.einsum("j...,j...->...", grad, grad))
    return float((mag / u).max())


def shi_monitor(rho: TwoForm, a: float, b: float) -> ScalarField:
    """f = |grad rho|^2 + a |grad u|^2 + b |rho|^2 + 1 (>= 1 pointwise)."""
    grad = _grad_u_values(rho)
    grad_u_sq = np.einsum("j...,j...->...", grad, grad)
    values = (calculus.grad_norm_sq(rho).values + a * grad_u_sq
              + b * forms.norm_sq_values(rho) + 1.0)
    return ScalarField(rho.grid, values)


def poincare_ratio(rho: TwoForm) -> float:
    """int |rho - omega|^2 / int |d* rho|^2; at most 1 on the side-2pi torus."""
    num = normalized_energy(rho)
    xi = calculus.codiff_two(rho)
    den = integrate(ScalarField(rho.grid, calculus.one_form_pointwise_inner(xi, xi)))
    if den < 1e-14:
        raise BadSeries(f"coexact energy {den:.3g} too small for a ratio")
    return num / den


def sobolev_poincare_ratio(rho: TwoForm) -> float:
    """int |rho - omega|^2 / (int |d* rho|^{4/3})^{3/2}."""
    num = normalized_energy(rho)
    xi = calculus.codiff_two(rho)
    mag = np.sqrt(calculus.one_form_pointwise_inner(xi, xi))
    den = integrate(ScalarField(rho.grid, mag ** (4.0 / 3.0))) ** 1.5
    if den < 1e-14:
        raise BadSeries(f"coexact 4/3-energy {den:.3g} too small for a ratio")
    return num / den


def make_record(rho: TwoForm, t: float, dt: float, ref_periods: np.ndarray,
                q1_weight: float = 10.0, monitor_a: float = 10.0,
                monitor_b: float = 100.0,
                u_floor: float = DEFAULT_U_FLOOR) -> TrajectoryRecord:
    u = forms.volume_potential_values(rho)
    lam1, lam2 = forms.eigenvalue_values(rho)
    try:
        e0 = normalized_energy(rho)
        q1 = q1_functional(rho, q1_weight)
    except CohomologyMismatch:
        e0 = float("nan")
        q1 = float("nan")
    try:
        sup_grad_log_u = grad_log_u_sup(rho, u_floor)
    except DegenerateForm:
        sup_grad_log_u = float("nan")
    per = calculus.periods(rho)
    drift = float(np.abs(per - ref_periods).max()
                  / max(1.0, float(np.abs(ref_periods).max())))
    return TrajectoryRecord(
        t=t, dt=dt, E=energy(rho), E0=e0,
        minU=float(u.min()), maxU=float(u.max()), meanU=float(u.mean()),
        minLambda2=float(lam2.min()), maxLambda1=float(lam1.max()),
        supGradLogU=sup_grad_log_u, Q1=q1,
        fMax=shi_monitor(rho, monitor_a, monitor_b).max(),
        dRhoResidual=calculus.max_abs_three(calculus.d_two(rho)),
        periodDrift=drift)


# ---------------------------------------------------------------------------
# Kato-type quantities and evolution-identity residuals


class _FlowGeometry:
    """Shared pointwise data for the identity checks of one form.

    All first derivatives of derived scalars are chain-ruled from the exact
    spectral derivatives of the rho components; Laplacians of derived fields
    are spectral (and carry the aliasing error the residual measures).
    """

    def __init__(self, rho: TwoForm):
        grid = rho.grid
        self.rho = rho
        self.grid = grid
        star = forms.hodge_star(rho)
        self.R = forms.as_skew_matrix(rho)          # rho_ij
        self.S = forms.as_skew_matrix(star)         # (*rho)_ij
        self.u = forms.volume_potential_values(rho)
        self.rho_sq = forms.norm_sq_values(rho)
        plus, minus = forms.sd_asd_split(rho)
        self.sp = np.sqrt(forms.norm_sq_values(plus))   # |rho+|
        self.sm = np.sqrt(forms.norm_sq_values(minus))  # |rho-|
        self.lam1 = (self.sp + self.sm) / SQRT2
        self.lam2 = (self.sp - self.sm) / SQRT2
        self.xi = calculus.codiff_two(rho).comps        # xi_k = rho_kl,l
        a, b = forms.matrix_ab(rho)
        self.a = a.entries
        self.b = b.entries

        # Exact first derivatives: D[j] = d_j rho (six components each).
        self.Drho = np.stack([calculus.deriv_values(rho.comps, grid, j)
                              for j in range(4)])
        star_perm = np.array([5, 4, 3, 2, 1, 0])
        star_sign = np.array([1.0, -1.0, 1.0, 1.0, -1.0, 1.0]
                             ).reshape((1, 6) + (1,) * 4)
        self.Dstar = self.Drho[:, star_perm] * star_sign  # d_j (*rho)
        self.Dplus = 0.5 * (self.Drho + self.Dstar)
        self.Dminus = 0.5 * (self.Drho - self.Dstar)

        # Chain-ruled gradients of the derived scalars.
        self.grad_rho_sq = 2.0 * np.einsum("c...,jc...->j...", rho.comps, self.Drho)
        self.grad_u = np.einsum("c...,jc...->j...", star.comps, self.Drho)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.grad_sp = np.einsum("c...,jc...->j...", plus.comps, self.Drho) \
                / np.where(self.sp > 0, self.sp, 1.0)
            self.grad_sm = np.einsum("c...,jc...->j...", minus.comps, self.Drho) \
                / np.where(self.sm > 0, self.sm, 1.0)
        self.grad_lam1 = (self.grad_sp + self.grad_sm) / SQRT2
        self.grad_lam2 = (self.grad_sp - self.grad_sm) / SQRT2

        # Full gradient magnitudes of the SD/ASD parts.
        self.grad_plus_sq = np.einsum("jc...,jc...->...", self.Dplus, self.Dplus)
        self.grad_minus_sq = np.einsum("jc...,jc...->...", self.Dminus, self.Dminus)

        # Laplacians.
        self.lap_comps = laplacian_values(rho.comps, grid)
        self.lapR = forms.as_skew_matrix(TwoForm(grid, self.lap_comps))

    def lap(self, values: np.ndarray) -> np.ndarray:
        return laplacian_values(values, self.grid)

    def jk(self):
        """Kato gap quantities J (from rho+) and K (from rho-), unguarded."""
        with np.errstate(divide="ignore", invalid="ignore"):
            j = (self.grad_plus_sq
                 - np.einsum("j...,j...->...", self.grad_sp, self.grad_sp)) \
                / (SQRT2 * self.sp)
            k = (self.grad_minus_sq
                 - np.einsum("j...,j...->...", self.grad_sm, self.grad_sm)) \
                / (SQRT2 * self.sm)
        return j, k

    def weight_and_grad(self, scheme: FlowScheme):
        """(h_ik, d_j h_ik) with the derivative chain-ruled pointwise.

        Returned shapes: (4, 4, *dims) and (4, 4, 4, *dims) with the
        derivative axis first.
        """
        grid_shape = (1,) * 4
        eye = np.eye(4).reshape(4, 4, *grid_shape)
        u, gu = self.u, self.grad_u
        if scheme.is_scalar:
            if scheme.kind == "linear":
                f = np.ones(self.grid.dims)
                gf = np.zeros((4,) + self.grid.dims)
            elif scheme.kind == "power_u":
                f = u ** (-scheme.r)
                gf = -scheme.r * u ** (-scheme.r - 1.0) * gu
            else:  # norm_ratio
                f = self.rho_sq / u
                gf = (self.grad_rho_sq * u - self.rho_sq * gu) / u ** 2
            return f * eye, gf[:, None, None] * eye[None]

        # d_j of the matrices a and b, chain-ruled from d_j rho.
        DR = np.stack([forms.as_skew_matrix(TwoForm(self.grid, self.Drho[j]))
                       for j in range(4)])
        DS = np.stack([forms.as_skew_matrix(TwoForm(self.grid, self.Dstar[j]))
                       for j in range(4)])
        Da = np.einsum("jip...,kp...->jik...", DR, self.R) \
            + np.einsum("ip...,jkp...->jik...", self.R, DR)
        Db = np.einsum("jip...,kp...->jik...", DS, self.S) \
            + np.einsum("ip...,jkp...->jik...", self.S, DS)

        if scheme.kind == "matrix_a1":
            return self.a / u, (Da * u - self.a[None] * gu[:, None, None]) / u ** 2
        if scheme.kind == "matrix_a2":
            return (self.a / u ** 2,
                    Da / u ** 2 - 2.0 * self.a[None] * gu[:, None, None] / u ** 3)
        if scheme.kind == "matrix_b1":
            return self.b / u, (Db * u - self.b[None] * gu[:, None, None]) / u ** 2
        if scheme.kind == "matrix_b2":
            return (self.b / u ** 2,
                    Db / u ** 2 - 2.0 * self.b[None] * gu[:, None, None] / u ** 3)
        # matrix_bh: sqrt(b) = (u I + b) / (lam1 + lam2), h = sqrt(b) / u
        trace = self.lam1 + self.lam2
        gtrace = self.grad_lam1 + self.grad_lam2
        sqrtb = (u * eye + self.b) / trace
        Dsqrtb = (gu[:, None, None] * eye[None] + Db) / trace \
            - sqrtb[None] * gtrace[:, None, None] / trace
        return sqrtb / u, (Dsqrtb * u - sqrtb[None] * gu[:, None, None]) / u ** 2


def jk_quantities(rho: TwoForm, mask_eps: float):
    """(J, K, valid-mask); J, K are zeroed where either dual part is tiny."""
    geo = _FlowGeometry(rho)
    j, k = geo.jk()
    valid = (geo.sp > mask_eps) & (geo.sm > mask_eps)
    j = np.where(valid, j, 0.0)
    k = np.where(valid, k, 0.0)
    return ScalarField(rho.grid, j), ScalarField(rho.grid, k), valid


RESIDUAL_QUANTITIES = ("rho_sq", "u", "rho_plus_sq", "rho_minus_sq",
                       "lambda1", "lambda2")

# Schemes with a catalogued closed form per quantity.  |rho|^2 and u have the
# general weight-matrix identity; the dual-part splits are catalogued for the
# scalar schemes, the eigenvalue identities for linear and the four plain
# matrix weights.
_LAMBDA_SCHEMES = ("linear", "matrix_a1", "matrix_a2", "matrix_b1", "matrix_b2")
_SPLIT_SCHEMES = ("linear", "power_u", "norm_ratio")


def _lhs_gateaux(geo: _FlowGeometry, rhs_form: TwoForm, quantity: str) -> np.ndarray:
    """Chain-rule derivative of the tracked quantity along the flow update."""
    dot = rhs_form.comps
    rho_dot = np.einsum("c...,c...->...", geo.rho.comps, dot)
    star_dot = np.einsum("c...,c...->...", forms.hodge_star(geo.rho).comps, dot)
    if quantity == "rho_sq":
        return 2.0 * rho_dot
    if quantity == "u":
        return star_dot
    if quantity == "rho_plus_sq":
        return rho_dot + star_dot
    if quantity == "rho_minus_sq":
        return rho_dot - star_dot
    with np.errstate(divide="ignore", invalid="ignore"):
        dsp = 0.5 * (rho_dot + star_dot) / geo.sp
        dsm = 0.5 * (rho_dot - star_dot) / geo.sm
    if quantity == "lambda1":
        return (dsp + dsm) / SQRT2
    if quantity == "lambda2":
        return (dsp - dsm) / SQRT2
    raise ValueError(f"unknown quantity {quantity!r}")


def _rhs_general(geo: _FlowGeometry, h, Dh, quantity: str) -> np.ndarray:
    """Weight-matrix identity for |rho|^2 and u (full-matrix index sums)."""
    first = np.einsum("ij...,ik...,kj...->...", geo.R if quantity == "rho_sq" else geo.S,
                      h, geo.lapR)
    second = np.einsum("ij...,jik...,k...->...",
                       geo.R if quantity == "rho_sq" else geo.S, Dh, geo.xi)
    if quantity == "rho_sq":
        return first + 2.0 * second
    return 0.5 * first + second


def _rhs_split_scalar(geo: _FlowGeometry, scheme: FlowScheme, quantity: str,
                      u_floor: float) -> np.ndarray:
    """Dual-part identities for the scalar weights f*identity."""
    f = forms.scalar_weight_values(geo.rho, scheme, u_floor)
    if scheme.kind == "linear":
        gf = np.zeros((4,) + geo.grid.dims)
    elif scheme.kind == "power_u":
        gf = -scheme.r * geo.u ** (-scheme.r - 1.0) * geo.grad_u
    else:
        gf = (geo.grad_rho_sq * geo.u - geo.rho_sq * geo.grad_u) / geo.u ** 2
    plus = quantity == "rho_plus_sq"
    part = 0.5 * (geo.R + geo.S) if plus else 0.5 * (geo.R - geo.S)
    part_sq = 0.5 * (geo.rho_sq + 2.0 * geo.u) if plus \
        else 0.5 * (geo.rho_sq - 2.0 * geo.u)
    grad_part_sq = geo.grad_plus_sq if plus else geo.grad_minus_sq
    diffusion = f * (geo.lap(part_sq) - 2.0 * grad_part_sq)
    transport = 2.0 * np.einsum("i...,ij...,j...->...", gf, part, geo.xi)
    return diffusion - transport


def _rhs_lambda(geo: _FlowGeometry, scheme: FlowScheme, quantity: str) -> np.ndarray:
    """Catalogued eigenvalue identities (defined where |rho-| and
    lambda1 - lambda2 stay away from zero)."""
    first = quantity == "lambda1"
    lam1, lam2, u, xi, b = geo.lam1, geo.lam2, geo.u, geo.xi, geo.b
    j_q, k_q = geo.jk()
    lap_lam = geo.lap(lam1 if first else lam2)
    gap = lam1 ** 2 - lam2 ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        if scheme.kind == "linear":
            return lap_lam - j_q - k_q if first else lap_lam - j_q + k_q

        bxx = np.einsum("ik...,i...,k...->...", b, xi, xi)
        xx = np.einsum("k...,k...->...", xi, xi)
        Rxi = np.einsum("kj...,k...->j...", geo.R, xi)
        Sxi = np.einsum("kj...,k...->j...", geo.S, xi)

        if scheme.kind == "matrix_a1":
            ratio_f = geo.rho_sq / u
            grad_f = (geo.grad_rho_sq * u - geo.rho_sq * geo.grad_u) / u ** 2
            f_term = np.einsum("j...,j...->...", grad_f, Rxi) / gap
            if first:
                return (lam1 / lam2 * (lap_lam - j_q - k_q)
                        + (lam1 * bxx - u * lam2 * xx) / (u * gap)
                        + lam1 * f_term)
            return (lam2 / lam1 * lap_lam + lam2 / lam1 * (k_q - j_q)
                    + (lam1 * u * xx - lam2 * bxx) / (u * gap)
                    - lam2 * f_term)

        if scheme.kind == "matrix_a2":
            g1 = geo.grad_lam1
            g2 = geo.grad_lam2
            if first:
                p = (np.einsum("j...,j...->...", g1, Sxi / lam2 - Rxi / lam1)
                     / (lam1 * gap)
                     + np.einsum("j...,j...->...", g2,
                                 Sxi / lam2 + Rxi / lam1
                                 - 2.0 * lam1 / lam2 ** 2 * Rxi)
                     / (lam2 * gap))
                return (lap_lam / lam2 ** 2 - (j_q + k_q) / lam2 ** 2
                        + (lam1 * bxx - u * lam2 * xx) / (u ** 2 * gap) + p)
            # The second eigenvalue rides along algebraically: u = lam1*lam2
            # pointwise, so its evolution is composed from the volume-potential
            # and first-eigenvalue identities.
            h, dh = geo.weight_and_grad(scheme)
            u_dot = _rhs_general(geo, h, dh, "u")
            return (u_dot - lam2 * _rhs_lambda(geo, scheme, "lambda1")) / lam1

        if scheme.kind == "matrix_b1":
            grad_f = (geo.grad_rho_sq * u - geo.rho_sq * geo.grad_u) / u ** 2
            f_term = np.einsum("j...,j...->...", grad_f, Sxi) / gap
            if first:
                return (lam2 / lam1 * (lap_lam - j_q - k_q)
                        - (lam1 * bxx - u * lam2 * xx) / (u * gap)
                        - lam2 * f_term)
            return (lam1 / lam2 * lap_lam + lam1 / lam2 * (k_q - j_q)
                    + (lam2 * bxx - u * lam1 * xx) / (u * gap)
                    + lam1 * f_term)

        if scheme.kind == "matrix_b2":
            hxx = bxx / u ** 2
            g1 = geo.grad_lam1
            g2 = geo.grad_lam2
            if first:
                extra = (np.einsum(
                    "j...,j...->...", g1,
                    (2.0 * lam2 / lam1 ** 2 - 1.0 / lam2) * Sxi - Rxi / lam1)
                    / (lam1 * gap)
                    + np.einsum("j...,j...->...", g2, Sxi / lam2 - Rxi / lam1)
                    / (lam2 * gap))
                return (lap_lam / lam1 ** 2 - (j_q + k_q) / lam1 ** 2
                        - lam1 * hxx / gap + xx / (lam1 * gap) + extra)
            extra = (np.einsum(
                "j...,j...->...", g2,
                Rxi / lam2 + Sxi / lam1 - 2.0 * lam1 / lam2 ** 2 * Sxi)
                / (lam2 * gap)
                + np.einsum("j...,j...->...", g1, Rxi / lam2 - Sxi / lam1)
                / (lam1 * gap))
            return (lap_lam / lam2 ** 2 + (k_q - j_q) / lam2 ** 2
                    + lam2 * hxx / gap - xx / (lam2 * gap) + extra)

    raise ValueError(f"no eigenvalue identity catalogued for {scheme.kind!r}")


def evolution_residual(rho: TwoForm, scheme: FlowScheme, quantity: str,
                       mask_eps: float = None,
                       u_floor: float = DEFAULT_U_FLOOR) -> float:
    """Relative sup-norm residual of the catalogued identity for one quantity.

    Compares the Gateaux derivative of the quantity along the flow update
    against the closed-form right-hand side; eigenvalue checks are restricted
    to points where |rho-|, |rho+| and lambda1 - lambda2 exceed mask_eps
    (default 1e-3 * max |rho|).
    """
    if quantity not in RESIDUAL_QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}")
    if quantity in ("lambda1", "lambda2") and scheme.kind not in _LAMBDA_SCHEMES:
        raise ValueError(f"no eigenvalue identity catalogued for {scheme.kind!r}")
    if quantity in ("rho_plus_sq", "rho_minus_sq") and scheme.kind not in _SPLIT_SCHEMES:
        raise ValueError(f"no dual-part identity catalogued for {scheme.kind!r}")

    geo = _FlowGeometry(rho)
    lhs = _lhs_gateaux(geo, flows.flow_rhs(rho, scheme, u_floor), quantity)

    if quantity in ("rho_sq", "u"):
        h, Dh = geo.weight_and_grad(scheme)
        rhs = _rhs_general(geo, h, Dh, quantity)
        mask = np.ones(rho.grid.dims, dtype=bool)
    elif quantity in ("rho_plus_sq", "rho_minus_sq"):
        rhs = _rhs_split_scalar(geo, scheme, quantity, u_floor)
        mask = np.ones(rho.grid.dims, dtype=bool)
    else:
        if mask_eps is None:
            mask_eps = 1e-3 * float(np.abs(rho.comps).max())
        rhs = _rhs_lambda(geo, scheme, quantity)
        mask = ((geo.sm > mask_eps) & (geo.sp > mask_eps)
                & (geo.lam1 - geo.lam2 > mask_eps))
        if not mask.any():
            raise ValueError("eigenvalue mask excludes every grid point")

    diff = np.abs(lhs - rhs)[mask]
    scale = max(float(np.abs(lhs[mask]).max()), float(np.abs(rhs[mask]).max()), _TINY)
    return float(diff.max()) / scale
