"""Polyatomic Gaussians on a phase grid.

Every constructor factorises as ``rho * Lambda_delta * g_v(v) * g_I(I)``: a
(possibly anisotropic) Gaussian in velocity with covariance ``cov`` and the
internal factor ``exp(-I^(2/delta) / T_I) / T_I^(delta/2)``. Exponents above
``UNDERFLOW_EXPONENT`` evaluate to exactly zero.

``matched_gaussian`` is the discretely moment-matched variant: its grid
moments reproduce the requested density, bulk velocity, covariance and
internal temperature to rounding, which makes the relaxation step
conservative on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import gammaln

from .linalg import jacobi_eigh
from .moments import (CorrectedTensor, DefinitenessError, MacroState,
                      corrected_tensor)
from .phase_grid import ModelParams, PhaseGrid

__all__ = [
    "UNDERFLOW_EXPONENT",
    "MatchError",
    "lambda_delta",
    "lambda_delta_quadrature",
    "gaussian_values",
    "gaussian_log_factors",
    "ellipsoidal_gaussian",
    "maxwellian_01",
    "maxwellian_00",
    "gaussian_theta",
    "matched_gaussian",
    "matched_factors",
    "GaussianFactors",
    "gaussian_factors",
    "target_parameters",
    "build_gaussian",
]

UNDERFLOW_EXPONENT = 700.0
LAMBDA_CHECK_RTOL = 1e-10


class MatchError(ArithmeticError):
    pass


def lambda_delta_quadrature(delta: float) -> float:
    """``1 / int_0^inf exp(-I^(2/delta)) dI`` by adaptive quadrature."""
    # Substituting I = u^(delta/2) gives (delta/2) int u^(delta/2 - 1) e^-u du;
    # the algebraic endpoint weight absorbs the singularity at u = 0.
    val, _ = sp_integrate.quad(lambda u: 0.5 * delta * math.exp(-u), 0.0, 1.0,
                               weight="alg", wvar=(0.5 * delta - 1.0, 0.0),
                               epsabs=0, epsrel=1e-13, limit=200)
    tail, _ = sp_integrate.quad(
        lambda u: 0.5 * delta * u ** (0.5 * delta - 1.0) * math.exp(-u),
        1.0, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return 1.0 / (val + tail)


@lru_cache(maxsize=64)
def lambda_delta(delta: float) -> float:
    """Normalisation of the internal-energy factor, ``2 / (delta Gamma(delta/2))``.

    The first call for each ``delta`` cross-checks the closed form against
    direct quadrature of the defining integral.
    """
    if not delta > 0:
        raise ValueError(f"delta must be > 0 (got {delta!r})")
    value = math.exp(math.log(2.0 / delta) - gammaln(0.5 * delta))
    check = lambda_delta_quadrature(delta)
    if abs(check - value) > LAMBDA_CHECK_RTOL * value:
        raise ArithmeticError(f"Lambda_delta mismatch for delta={delta}: {value} vs {check}")
    return value


def _safe_exp(exponent: np.ndarray) -> np.ndarray:
    out = np.zeros_like(exponent)
    ok = exponent <= UNDERFLOW_EXPONENT
    np.exp(-exponent, out=out, where=ok)
    return out


def _velocity_exponent(grid: PhaseGrid, U, eigvals, eigvecs) -> np.ndarray:
    # Quadratic form evaluated in the eigenbasis.
    y = (grid.v_points - np.asarray(U)) @ eigvecs
    return 0.5 * np.sum(y * y / eigvals, axis=1)


def _eigh_pd(cov):
    w, vecs = jacobi_eigh(cov)
    if not w[0] > 0:
        raise DefinitenessError(f"covariance not positive definite: eigenvalues {w}")
    return w, vecs


def gaussian_log_factors(U, cov, T_I, grid: PhaseGrid, eig=None):
    """``(log g_v, log g_I)`` with ``M = rho * exp(log g_v[:, None] + log g_I[None, :])``.

    Both factors carry their normalisation, so each integrates to one in the
    continuum. ``eig`` may pass a precomputed ``(eigenvalues, eigenvectors)``
    pair of ``cov``.
    """
    if not T_I > 0:
        raise DefinitenessError(f"need T_I > 0 (got {T_I})")
    w, vecs = eig if eig is not None else _eigh_pd(cov)
    if not w[0] > 0:
        raise DefinitenessError(f"covariance not positive definite: eigenvalues {w}")
    delta = grid.delta
    log_pref_v = -0.5 * float(np.sum(np.log(2.0 * np.pi * w)))
    log_pref_I = math.log(lambda_delta(delta)) - 0.5 * delta * math.log(T_I)
    return (log_pref_v - _velocity_exponent(grid, U, w, vecs),
            log_pref_I - grid.energy / T_I)


def gaussian_values(rho, U, cov, T_I, grid: PhaseGrid, eig=None) -> np.ndarray:
    """Pointwise polyatomic Gaussian with velocity covariance ``cov``."""
    if not (rho > 0 and T_I > 0):
        raise DefinitenessError(f"need rho > 0 and T_I > 0 (got rho={rho}, T_I={T_I})")
    lv, lI = gaussian_log_factors(U, cov, T_I, grid, eig)
    out = np.subtract.outer(-lv, lI)
    out = _safe_exp(out)
    out *= rho
    return out.reshape(grid.shape)


def ellipsoidal_gaussian(state: MacroState, ct: CorrectedTensor, params: ModelParams,
                         grid: PhaseGrid) -> np.ndarray:
    return gaussian_values(state.rho, state.U, ct.Tensor, ct.T_relax, grid,
                           eig=(ct.eigenvalues, ct.eigenvectors))


def maxwellian_01(state: MacroState, params: ModelParams, grid: PhaseGrid) -> np.ndarray:
    d = state.d
    T = state.T_delta
    return gaussian_values(state.rho, state.U, T * np.eye(d), T, grid,
                           eig=(np.full(d, T), np.eye(d)))


def maxwellian_00(state: MacroState, params: ModelParams, grid: PhaseGrid) -> np.ndarray:
    d = state.d
    T = state.T_tr
    return gaussian_values(state.rho, state.U, T * np.eye(d), state.T_int, grid,
                           eig=(np.full(d, T), np.eye(d)))


def gaussian_theta(state: MacroState, params: ModelParams, grid: PhaseGrid) -> np.ndarray:
    return gaussian_values(state.rho, state.U, state.Theta, state.T_int, grid)


def target_parameters(kind: str, state: MacroState, params: ModelParams, ct=None):
    """``(covariance, internal temperature)`` of a named Gaussian."""
    d = state.d
    if kind == "M_nu_theta":
        ct = ct if ct is not None else corrected_tensor(state, params)
        return ct.Tensor, ct.T_relax
    if kind == "M01":
        return state.T_delta * np.eye(d), state.T_delta
    if kind == "M00":
        return state.T_tr * np.eye(d), state.T_int
    if kind == "M_Theta":
        return state.Theta, state.T_int
    raise ValueError(f"unknown Gaussian kind {kind!r}")


def build_gaussian(kind: str, state: MacroState, params: ModelParams, grid: PhaseGrid,
                   ct=None, matched: bool = False) -> np.ndarray:
    """Construct a named Gaussian, raw or moment-matched."""
    if matched:
        cov, T_I = target_parameters(kind, state, params, ct)
        return matched_gaussian(state.rho, state.U, cov, T_I, grid)
    if kind == "M_nu_theta":
        ct = ct if ct is not None else corrected_tensor(state, params)
        return ellipsoidal_gaussian(state, ct, params, grid)
    return {"M01": maxwellian_01, "M00": maxwellian_00, "M_Theta": gaussian_theta}[kind](
        state, params, grid)


MATCH_RTOL = 1e-14
MATCH_MAXITER = 60


def _match_velocity(grid: PhaseGrid, U, cov):
    """Unit-mass velocity Gaussian whose grid mean and covariance are (U, cov).

    Returns the values and their logarithm.
    """
    U = np.asarray(U, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    scale = float(np.max(np.abs(np.linalg.eigvalsh(cov))))
    m, S = U.copy(), cov.copy()
    pts = grid.v_points
    for _ in range(MATCH_MAXITER):
        w, vecs = _eigh_pd(S)
        q = _velocity_exponent(grid, m, w, vecs)
        g = _safe_exp(q)
        Z = grid.integrate_v(g)
        g /= Z
        mean = grid.v_cell * (g @ pts)
        c = pts - mean
        cov_g = grid.v_cell * ((c * g[:, None]).T @ c)
        err_m = U - mean
        err_S = cov - 0.5 * (cov_g + cov_g.T)
        if (np.max(np.abs(err_m)) <= MATCH_RTOL * math.sqrt(scale)
                and np.max(np.abs(err_S)) <= MATCH_RTOL * scale):
            return g, -q - math.log(Z)
        m = m + err_m
        S = S + err_S
    raise MatchError(f"velocity moment matching did not converge (cov={cov.tolist()})")


def _match_internal(grid: PhaseGrid, T_I):
    """Unit-mass internal factor whose grid mean of I^(2/delta) is delta T_I / 2.

    Returns the values and their logarithm.
    """
    eps, wI = grid.energy, grid.I_weights
    target = 0.5 * grid.delta * T_I
    tau = T_I
    for _ in range(MATCH_MAXITER):
        g = _safe_exp(eps / tau)
        Z = g @ wI
        g /= Z
        mean = (g * eps) @ wI
        var = (g * (eps - mean) ** 2) @ wI
        err = target - mean
        if abs(err) <= MATCH_RTOL * target:
            return g, -eps / tau - math.log(Z)
        # d<eps>/d tau = Var(eps) / tau^2
        step = err * tau * tau / var
        tau = max(tau + step, 0.5 * tau)
    raise MatchError(f"internal-energy moment matching did not converge (T_I={T_I})")


def matched_gaussian(rho, U, cov, T_I, grid: PhaseGrid) -> np.ndarray:
    """Grid Gaussian with exactly the requested discrete moments.

    The result is ``rho * g_v(v) * g_I(I)`` where each factor is an
    exponential of a quadratic (resp. linear) function of ``v`` (resp.
    ``I^(2/delta)``), with parameters tuned so that the grid mean and
    covariance of ``g_v`` are ``U`` and ``cov`` and the grid mean of
    ``I^(2/delta)`` under ``g_I`` is ``delta T_I / 2``.
    """
    return matched_factors(rho, U, cov, T_I, grid).values(grid)


def matched_factors(rho, U, cov, T_I, grid: PhaseGrid) -> "GaussianFactors":
    if not (rho > 0 and T_I > 0):
        raise DefinitenessError(f"need rho > 0 and T_I > 0 (got rho={rho}, T_I={T_I})")
    _, lv = _match_velocity(grid, U, cov)
    _, lI = _match_internal(grid, T_I)
    return GaussianFactors(float(rho), lv, lI)


@dataclass(frozen=True, eq=False)
class GaussianFactors:
    """A grid Gaussian ``rho * exp(log_v[j] + log_I[k])`` kept in factored form.

    Entropy integrals against a factored Gaussian reduce to sums over the
    velocity nodes and the internal-energy nodes separately, so they never
    need the full ``(n_v^d, n_I)`` array. Factors below ``exp(-700)`` are
    stored as exact zeros in ``values``; the logarithms stay finite.
    """

    rho: float
    log_v: np.ndarray
    log_I: np.ndarray

    def _factors(self):
        return _safe_exp(-self.log_v), _safe_exp(-self.log_I)

    def values(self, grid: PhaseGrid) -> np.ndarray:
        gv, gI = self._factors()
        return np.multiply.outer(gv, self.rho * gI).reshape(grid.shape)

    def h(self, grid: PhaseGrid) -> float:
        """Grid quadrature of ``G ln G``."""
        gv, gI = self._factors()
        wI = grid.I_weights
        Sv = grid.v_cell * gv.sum()
        Tv = grid.v_cell * (gv * self.log_v).sum()
        SI = gI @ wI
        TI = (gI * self.log_I) @ wI
        return float(self.rho * (math.log(self.rho) * Sv * SI + Tv * SI + Sv * TI))

    def cross(self, grid: PhaseGrid, mass: float, f_v, f_logI) -> float:
        """``int f ln G`` from the I-contracted marginals of ``f``.

        ``f_v = sum_k w_k f[:, k]`` and ``f_logI = sum_k w_k log_I[k] f[:, k]``
        (both flat over velocity nodes); ``mass`` is the grid mass of ``f``.
        """
        return float(mass * math.log(self.rho)
                     + grid.v_cell * (np.dot(f_v, self.log_v) + np.sum(f_logI)))


def gaussian_factors(kind: str, state: MacroState, params: ModelParams, grid: PhaseGrid,
                     ct=None, matched: bool = False) -> GaussianFactors:
    """Factored form of a named Gaussian, raw or moment-matched."""
    if kind == "M_nu_theta" and ct is None:
        ct = corrected_tensor(state, params)
    cov, T_I = target_parameters(kind, state, params, ct)
    if matched:
        return matched_factors(state.rho, state.U, cov, T_I, grid)
    d = state.d
    if kind == "M_nu_theta":
        eig = (ct.eigenvalues, ct.eigenvectors)
    elif kind in ("M01", "M00"):
        eig = (np.full(d, cov[0, 0]), np.eye(d))
    else:
        eig = None
    lv, lI = gaussian_log_factors(state.U, cov, T_I, grid, eig)
    return GaussianFactors(float(state.rho), lv, lI)
