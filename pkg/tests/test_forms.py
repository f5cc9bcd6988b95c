import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hodgeflow import forms
from hodgeflow.errors import DegenerateForm
from hodgeflow.forms import (ALL_SCHEMES, CONFORMAL, FlowScheme, TwoForm,
                             as_skew_matrix, eigenvalue_values, hodge_star,
                             matrix_ab, norm_sq_values, omega, scheme_from_name,
                             sd_asd_split, sqrt_b_values, volume_potential_values,
                             weight_h, weight_spectral_radius)
from hodgeflow.grid import PeriodicGrid

from conftest import random_form


def sample_points(grid, count, seed=0):
    rng = np.random.default_rng(seed)
    return tuple(rng.integers(0, n, size=count) for n in grid.dims)


# ---------------------------------------------------------------------------
# dense linear-algebra oracles at sampled grid points

def test_eigenvalues_against_dense_eigensolver(grid8):
    rho = random_form(grid8, eps=0.6, band=2, seed=12)
    lam1, lam2 = eigenvalue_values(rho)
    A = as_skew_matrix(rho)
    idx = sample_points(grid8, 40, seed=1)
    for n in range(40):
        p = tuple(ax[n] for ax in idx)
        M = A[(slice(None), slice(None)) + p]
        imag = np.sort(np.abs(np.linalg.eigvals(M).imag))
        # eigenvalues come in +-i lambda pairs
        pair = np.sort([abs(lam1[p]), abs(lam2[p])])
        assert np.abs(np.sort(imag)[[1, 3]] - pair[[0, 1]]).max() < 1e-10


def test_u_is_pfaffian(grid8):
    rho = random_form(grid8, eps=0.6, band=2, seed=7)
    u = volume_potential_values(rho)
    A = as_skew_matrix(rho)
    idx = sample_points(grid8, 40, seed=2)
    for n in range(40):
        p = tuple(ax[n] for ax in idx)
        M = A[(slice(None), slice(None)) + p]
        det = np.linalg.det(M)
        assert det == pytest.approx(u[p] ** 2, rel=1e-9, abs=1e-12)


def test_sqrt_b_against_symmetric_eigensolver(grid8):
    rho = random_form(grid8, eps=0.5, band=2, seed=21)
    root = sqrt_b_values(rho)
    _, b = matrix_ab(rho)
    idx = sample_points(grid8, 30, seed=3)
    for n in range(30):
        p = tuple(ax[n] for ax in idx)
        B = b.entries[(slice(None), slice(None)) + p]
        w, v = np.linalg.eigh(B)
        oracle = v @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ v.T
        assert np.abs(root[(slice(None), slice(None)) + p] - oracle).max() < 1e-9


def test_sqrt_b_squares_to_b(grid8):
    rho = random_form(grid8, eps=0.5, band=2, seed=22)
    root = sqrt_b_values(rho)
    _, b = matrix_ab(rho)
    sq = np.einsum("ik...,kj...->ij...", root, root)
    assert np.abs(sq - b.entries).max() < 1e-11


# ---------------------------------------------------------------------------
# pointwise identities

def test_star_involution_and_isometry(grid8):
    rho = random_form(grid8, 0.7, seed=5)
    twice = hodge_star(hodge_star(rho))
    assert np.abs(twice.comps - rho.comps).max() == 0.0
    assert np.abs(norm_sq_values(hodge_star(rho)) - norm_sq_values(rho)).max() < 1e-13


def test_reference_form_is_self_dual(grid8):
    w = omega(grid8)
    assert np.abs(hodge_star(w).comps - w.comps).max() == 0.0
    plus, minus = sd_asd_split(w)
    assert np.abs(minus.comps).max() == 0.0
    assert np.abs(plus.comps - w.comps).max() == 0.0


def test_two_u_is_rho_pairing(grid8):
    rho = random_form(grid8, 0.7, seed=6)
    pair = np.einsum("c...,c...->...", rho.comps, hodge_star(rho).comps)
    assert np.abs(2 * volume_potential_values(rho) - pair).max() < 1e-12


def test_eigenvalue_scalar_identities(grid8):
    rho = random_form(grid8, 0.7, seed=8)
    lam1, lam2 = eigenvalue_values(rho)
    u = volume_potential_values(rho)
    assert np.abs(lam1 * lam2 - u).max() < 1e-11
    assert np.abs(lam1 ** 2 + lam2 ** 2 - norm_sq_values(rho)).max() < 1e-11
    assert np.all(lam1 >= np.abs(lam2) - 1e-12)


def test_a_plus_b_is_norm_identity(grid8):
    rho = random_form(grid8, 0.7, seed=9)
    a, b = matrix_ab(rho)
    total = a.entries + b.entries
    eye = np.eye(4).reshape(4, 4, 1, 1, 1, 1)
    assert np.abs(total - norm_sq_values(rho) * eye).max() < 1e-12


def test_ab_eigenvalues(grid8):
    # a and b both have spectrum {lam1^2 (x2), lam2^2 (x2)} pointwise
    rho = random_form(grid8, 0.5, seed=10)
    lam1, lam2 = eigenvalue_values(rho)
    a, b = matrix_ab(rho)
    idx = sample_points(grid8, 20, seed=4)
    for n in range(20):
        p = tuple(ax[n] for ax in idx)
        want = np.sort([lam2[p] ** 2, lam2[p] ** 2, lam1[p] ** 2, lam1[p] ** 2])
        for m in (a, b):
            got = np.sort(np.linalg.eigvalsh(m.entries[(slice(None), slice(None)) + p]))
            assert np.abs(got - want).max() < 1e-10


# ---------------------------------------------------------------------------
# schemes and weights

def test_scheme_parsing():
    assert scheme_from_name("conformal") == CONFORMAL
    assert scheme_from_name("power_u:0.25") == FlowScheme("power_u", 0.25)
    assert scheme_from_name("power_u") == CONFORMAL
    assert scheme_from_name("matrix_b2").kind == "matrix_b2"
    with pytest.raises(ValueError):
        scheme_from_name("nope")
    with pytest.raises(ValueError):
        FlowScheme("power_u", -1.0)
    with pytest.raises(ValueError):
        FlowScheme("linear", 0.5)


def test_weight_matrices_match_scalar_weights(grid8):
    rho = random_form(grid8, 0.3, seed=11)
    for scheme in ALL_SCHEMES:
        h = weight_h(rho, scheme)
        if scheme.is_scalar:
            f = forms.scalar_weight_values(rho, scheme)
            assert np.abs(h.entries[0, 0] - f).max() < 1e-13
            assert np.abs(h.entries[0, 1]).max() == 0.0


def test_weight_spectral_radius_oracle(grid8):
    rho = random_form(grid8, 0.4, seed=13)
    idx = sample_points(grid8, 15, seed=5)
    for scheme in ALL_SCHEMES:
        radius = weight_spectral_radius(rho, scheme)
        h = weight_h(rho, scheme)
        for n in range(15):
            p = tuple(ax[n] for ax in idx)
            top = np.linalg.eigvalsh(h.entries[(slice(None), slice(None)) + p]).max()
            assert radius[p] == pytest.approx(top, rel=1e-9, abs=1e-11)


def test_degenerate_form_raises(grid8):
    rho = TwoForm.zero(grid8)  # u = 0 everywhere
    with pytest.raises(DegenerateForm):
        forms.scalar_weight_values(rho, CONFORMAL)
    with pytest.raises(DegenerateForm):
        weight_h(rho, forms.MATRIX_A1)
    # the unweighted scheme needs no positivity
    assert forms.scalar_weight_values(rho, forms.LINEAR).max() == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_pointwise_identities_on_random_constant_forms(seed):
    # single-point oracle: constant forms with arbitrary six components
    grid = PeriodicGrid((8,) * 4)
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(6)
    rho = TwoForm(grid, np.tile(c.reshape(6, 1, 1, 1, 1), (1,) + grid.dims))
    u = volume_potential_values(rho)
    assert u.flat[0] == pytest.approx(c[0] * c[5] - c[1] * c[4] + c[2] * c[3])
    lam1, lam2 = eigenvalue_values(rho)
    assert np.abs(lam1 * lam2 - u).max() < 1e-10
    A = as_skew_matrix(rho)[:, :, 0, 0, 0, 0]
    assert np.linalg.det(A) == pytest.approx(float(u.flat[0]) ** 2,
                                             rel=1e-8, abs=1e-10)
