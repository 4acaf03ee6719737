import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esbgk.entropy import (KullbackHypothesisError, RegimeError, SupportError,
                           certify_lemma21, certify_lemma22, certify_lemma31,
                           certify_theorem, entropy_production, h_closed_form,
                           h_functional, kullback_bound, l1_distance,
                           lemma21_gap, lemma31_explicit_difference,
                           lemma31_gap, lemma31_generic_difference,
                           relative_entropy, theta_zero_factor)
from esbgk.gaussians import build_gaussian, gaussian_values
from esbgk.moments import MacroState, compute_moments, corrected_tensor
from esbgk.phase_grid import ModelParams

from conftest import bimodal

# -(3/2) ln(2 pi) - 5/2: H of the unit Maxwellian with d = 3, delta = 2
H_UNIT_3D = -5.256815599614018


def random_state(rng, d=3, delta=2.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = np.exp(rng.uniform(np.log(0.2), np.log(5.0), d))
    return MacroState.from_primitives(np.exp(rng.uniform(-2, 2)), rng.standard_normal(d),
                                      (q * lam) @ q.T, np.exp(rng.uniform(-1.5, 1.5)), delta)


def test_closed_form_of_unit_maxwellian():
    s = MacroState.from_primitives(1.0, np.zeros(3), np.eye(3), 1.0, 2.0)
    p = ModelParams(3, 2.0, 0.5, 0.5)
    for kind in ("M01", "M00", "M_Theta", "M_nu_theta"):
        assert math.isclose(h_closed_form(kind, s, None, p), H_UNIT_3D, rel_tol=1e-14)


def test_closed_form_density_and_temperature_scaling():
    # H(rho, T) = rho ln rho + rho H_unit - (d + delta)/2 rho ln T
    s = MacroState.from_primitives(2.0, np.zeros(3), 3.0 * np.eye(3), 3.0, 2.0)
    got = h_closed_form("M01", s, None, ModelParams(3, 2.0))
    assert math.isclose(got, 2 * math.log(2) + 2 * H_UNIT_3D - 5 * math.log(3.0), rel_tol=1e-14)


@pytest.mark.parametrize("kind", ["M01", "M00", "M_Theta", "M_nu_theta"])
def test_discrete_h_matches_closed_form_d1(grid1, kind):
    grid, p = grid1
    s = MacroState.from_primitives(1.2, [0.3], [[1.3]], 0.8, 2.0)
    M = build_gaussian(kind, s, p, grid)
    H = h_closed_form(kind, s, None, p)
    assert abs(h_functional(M, grid) - H) <= 1e-3 * (1 + abs(H))


def test_relative_entropy_basics(grid1):
    grid, p = grid1
    f = gaussian_values(1.0, [0.2], [[1.1]], 0.9, grid)
    g = gaussian_values(1.0, [0.0], [[1.0]], 1.0, grid)
    assert relative_entropy(f, f, grid) == 0.0
    assert relative_entropy(f, g, grid) > 0
    with pytest.raises(SupportError):
        relative_entropy(g, np.where(np.arange(g.shape[0])[:, None] == 100, 0.0, g), grid)


def test_kullback_inequality_and_mass_hypothesis(grid1):
    grid, p = grid1
    f = gaussian_values(1.0, [0.5], [[0.7]], 1.3, grid)
    g = gaussian_values(1.0, [-0.2], [[1.4]], 0.8, grid)
    assert l1_distance(f, g, grid) <= kullback_bound(relative_entropy(f, g, grid))
    with pytest.raises(KullbackHypothesisError):
        l1_distance(f, 2 * g, grid)


def test_entropy_production_vanishes_at_equilibrium(grid1):
    grid, p = grid1
    s = MacroState.from_primitives(1.0, [0.0], [[1.0]], 1.0, 2.0)
    M = build_gaussian("M01", s, p, grid, matched=True)
    assert abs(entropy_production(M, M, 1.0, grid)) < 1e-14


def test_entropy_production_clamp_reports_floored_nodes(grid1):
    grid, p = grid1
    f = gaussian_values(1.0, [0.0], [[1.0]], 1.0, grid)
    M = f.copy()
    f[0, 0] = 0.0
    D, n, bias = entropy_production(f, M, 1.0, grid, return_clamp=True)
    assert n == 1 and bias != 0.0


@pytest.mark.parametrize("seed", range(5))
def test_lemma21_gap_nonnegative(seed):
    rng = np.random.default_rng(seed)
    s = random_state(rng)
    for th in (0.1, 0.5, 0.9):
        for nu in (-0.45, 0.0, 0.6):
            gap, scale = lemma21_gap(s, ModelParams(3, 2.0, nu, th))
            assert gap >= -1e-12 * scale


def test_lemma21_requires_positive_theta():
    s = random_state(np.random.default_rng(0))
    with pytest.raises(RegimeError):
        certify_lemma21(s, ModelParams(3, 2.0, 0.5, 0.0))
    with pytest.raises(RegimeError):
        lemma31_gap(s, ModelParams(3, 2.0, 0.5, 0.5))


def test_lemma21_gap_is_zero_at_theta_one():
    s = random_state(np.random.default_rng(3))
    assert certify_lemma21(s, ModelParams(3, 2.0, 0.3, 1.0)) == 0.0


@settings(max_examples=300, deadline=None)
@given(st.floats(-0.49, 0.99), st.floats(1e-6, 1.0), st.floats(0.2, 8.0),
       st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_lemma21_property(nu, theta, delta, d, seed):
    s = random_state(np.random.default_rng(seed), d, delta)
    gap, scale = lemma21_gap(s, ModelParams(d, delta, nu, theta))
    assert gap >= -1e-12 * scale


@settings(max_examples=300, deadline=None)
@given(st.floats(-0.49, 0.99), st.floats(0.2, 8.0), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_lemma31_property(nu, delta, d, seed):
    s = random_state(np.random.default_rng(seed), d, delta)
    assert certify_lemma31(s, ModelParams(d, delta, nu, 0.0)).passed


def test_theta_zero_factor():
    assert theta_zero_factor(0.5, 3) == 0.5
    assert theta_zero_factor(-0.4, 3) == pytest.approx(0.8)
    assert theta_zero_factor(-0.4, 1) == 0.0


def test_lemma31_explicit_form_equals_generic_for_isotropic_theta():
    s = MacroState.from_primitives(1.4, np.zeros(3), 1.7 * np.eye(3), 0.9, 2.0)
    for nu in (-0.3, 0.0, 0.4):
        p = ModelParams(3, 2.0, nu, 0.0)
        assert math.isclose(lemma31_explicit_difference(s, p),
                            lemma31_generic_difference(s, p), abs_tol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.49, 0.99), st.integers(0, 2**32 - 1))
def test_lemma31_explicit_form_is_a_lower_bound(nu, seed):
    # ln det of the mixed tensor dominates the mixture of ln dets (concavity of ln det)
    s = random_state(np.random.default_rng(seed))
    p = ModelParams(3, 2.0, nu, 0.0)
    generic = lemma31_generic_difference(s, p)
    assert lemma31_explicit_difference(s, p) <= generic + 1e-12 * max(1.0, abs(generic))


def test_lemma22_orders_the_entropies(grid1):
    grid, p = grid1
    f = bimodal(grid, 1)
    s = compute_moments(f, grid, p)
    g1, g2 = certify_lemma22(f, s, p, grid)
    assert g1 >= 0 and g2 >= 0


@pytest.mark.parametrize("nu, theta", [(0.5, 0.5), (0.5, 0.0), (-0.4, 0.0), (0.0, 1.0)])
def test_theorem_certificate_on_bimodal_d1(grid1, nu, theta):
    grid, _ = grid1
    p = ModelParams(1, 2.0, nu, theta)
    f = bimodal(grid, 1)
    s = compute_moments(f, grid, p)
    r = certify_theorem(f, s, corrected_tensor(s, p), p, grid)
    assert r.passed, r.certificates
    assert r.regime == ("theta_pos" if theta > 0 else "theta_zero")
    assert r.theorem_gap >= 0
    assert set(r.to_dict()) >= {"H_f", "D", "theorem_gap", "passed"}
