"""H-functionals, entropy production and the entropy inequalities.

Discrete quantities are grid quadratures; ``h_closed_form`` gives the exact
H-functional of each named Gaussian from the macroscopic state alone. The
two lemma certificates on the Gaussian entropies use closed forms only; the
remaining certificates compare quadratures and are judged against the
quadrature budget ``tol_quad``.

Velocity dimension ``d`` replaces the constant 3 throughout. For ``nu < 0``
the weights of the convex-combination argument are ``1 + (d-1) nu`` and
``-nu``, so the theta = 0 constants become ``max(nu, -(d-1) nu)`` and
``min(1 - nu, 1 + (d-1) nu)``; at ``d = 3`` these are the usual
``max(nu, -2 nu)`` and ``min(1 - nu, 1 + 2 nu)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gaussians import build_gaussian, gaussian_factors, lambda_delta
from .linalg import jacobi_eigh
from .moments import (CorrectedTensor, MacroState, collision_frequency,
                      corrected_tensor)
from .phase_grid import ModelParams, PhaseGrid, integrate

__all__ = [
    "LOG_FLOOR",
    "LEMMA_RTOL",
    "KINDS",
    "EntropyError",
    "SupportError",
    "RegimeError",
    "KullbackHypothesisError",
    "EntropyReport",
    "default_tol_quad",
    "h_functional",
    "relative_entropy",
    "entropy_production",
    "h_closed_form",
    "lemma21_gap",
    "certify_lemma21",
    "certify_lemma22",
    "lemma31_gap",
    "lemma31_generic_difference",
    "lemma31_explicit_difference",
    "certify_lemma31",
    "Lemma31Result",
    "theta_zero_factor",
    "certify_theorem",
    "l1_distance",
    "kullback_bound",
]

LOG_FLOOR = 1e-300
LEMMA_RTOL = 1e-12
KULLBACK_MASS_RTOL = 1e-3
KINDS = ("M_nu_theta", "M_Theta", "M01", "M00")


class EntropyError(ValueError):
    pass


class SupportError(EntropyError):
    pass


class RegimeError(EntropyError):
    pass


class KullbackHypothesisError(EntropyError):
    pass


def default_tol_quad(rho: float, H_f: float) -> float:
    return 1e-4 * rho * (1.0 + abs(H_f))


def _check_nonneg(f, name="f"):
    lo = float(np.min(f))
    if lo < 0:
        raise EntropyError(f"{name} has negative values (min {lo:.3e})")


_TINY = np.finfo(np.float64).tiny


def _xlogy(x, y):
    """``x * ln(y)`` for ``x >= 0``, with ``0 * ln(anything) = 0``.

    ``y`` is floored at the smallest normal double; where ``x`` is nonzero
    and ``y`` is that small the change is below 1e-305 per node.
    """
    out = np.maximum(y, _TINY)
    np.log(out, out=out)
    out *= x
    return out


def h_functional(f, grid: PhaseGrid) -> float:
    f = np.asarray(f, dtype=np.float64)
    _check_nonneg(f)
    return integrate(grid, _xlogy(f, f))


def relative_entropy(f, g, grid: PhaseGrid) -> float:
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    _check_nonneg(f)
    _check_nonneg(g, "g")
    zero_g = g == 0
    if zero_g.any():
        bad = zero_g & (f > 0)
        if bad.any():
            idx = np.unravel_index(int(np.argmax(bad)), f.shape)
            raise SupportError(f"f > 0 where g = 0 at node {tuple(int(i) for i in idx)}")
    ratio = np.maximum(g, _TINY)
    np.divide(f, ratio, out=ratio)
    return integrate(grid, _xlogy(f, ratio))


def entropy_production(f, M, A: float, grid: PhaseGrid, return_clamp: bool = False):
    """``-A * int (M - f) ln f``.

    Nodes with ``f < LOG_FLOOR`` but ``M > 0`` use ``ln LOG_FLOOR``. With
    ``return_clamp`` the clamped-node count and their contribution to the
    result are returned as well.
    """
    f = np.asarray(f, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if not A > 0:
        raise EntropyError(f"collision frequency must be > 0 (got {A!r})")
    _check_nonneg(f)
    _check_nonneg(M, "M")
    # Where f and M both vanish the factor (M - f) is exactly 0, so the
    # floored log contributes nothing there.
    integrand = np.maximum(f, LOG_FLOOR)
    np.log(integrand, out=integrand)
    integrand *= M - f
    D = -A * integrate(grid, integrand)
    if not return_clamp:
        return D
    clamp = (f < LOG_FLOOR) & (M > 0)
    n_clamped = int(clamp.sum())
    bias = -A * integrate(grid, np.where(clamp, integrand, 0.0)) if n_clamped else 0.0
    return D, n_clamped, bias


def _gaussian_entropy(rho, log_det_cov, T_I, d, delta):
    if not (rho > 0 and T_I > 0 and np.isfinite(log_det_cov)):
        raise EntropyError(
            f"closed form needs rho > 0, T_I > 0 and a positive determinant "
            f"(rho={rho}, T_I={T_I}, log det={log_det_cov})")
    return (rho * math.log(rho * lambda_delta(delta))
            - 0.5 * rho * (d * math.log(2.0 * math.pi) + log_det_cov)
            - 0.5 * delta * rho * math.log(T_I)
            - 0.5 * (d + delta) * rho)


def _log_det(eigenvalues) -> float:
    w = np.asarray(eigenvalues, dtype=float)
    if not np.all(w > 0):
        raise EntropyError(f"nonpositive eigenvalue in {w}")
    return float(np.sum(np.log(w)))


def _theta_log_det(state: MacroState) -> float:
    return _log_det(jacobi_eigh(state.Theta)[0])


def h_closed_form(which: str, state: MacroState, ct: CorrectedTensor | None,
                  params: ModelParams) -> float:
    """Exact H-functional of a named Gaussian built from ``state``."""
    d, delta = state.d, params.delta
    if which == "M_nu_theta":
        ct = ct if ct is not None else corrected_tensor(state, params)
        return _gaussian_entropy(state.rho, _log_det(ct.eigenvalues), ct.T_relax, d, delta)
    if which == "M_Theta":
        return _gaussian_entropy(state.rho, _theta_log_det(state), state.T_int, d, delta)
    if which == "M01":
        return _gaussian_entropy(state.rho, _log_det(np.full(d, state.T_delta)),
                                 state.T_delta, d, delta)
    if which == "M00":
        return _gaussian_entropy(state.rho, _log_det(np.full(d, state.T_tr)),
                                 state.T_int, d, delta)
    raise ValueError(f"unknown Gaussian kind {which!r}")


def _closed_forms(state, params, ct=None):
    ct = ct if ct is not None else corrected_tensor(state, params)
    return {k: h_closed_form(k, state, ct, params) for k in KINDS}


def _lemma_scale(hs) -> float:
    return max(1.0, *(abs(v) for v in hs.values()))


def lemma21_gap(state: MacroState, params: ModelParams, ct=None) -> tuple[float, float]:
    """``(gap, scale)`` of H(M01) - H(Mnt) >= (1 - theta)(H(M01) - H(MTheta))."""
    if params.theta == 0:
        raise RegimeError("theta = 0 belongs to the second regime; use certify_lemma31")
    hs = _closed_forms(state, params, ct)
    lhs = hs["M01"] - hs["M_nu_theta"]
    rhs = (1.0 - params.theta) * (hs["M01"] - hs["M_Theta"])
    return lhs - rhs, _lemma_scale(hs)


def certify_lemma21(state: MacroState, params: ModelParams, ct=None) -> float:
    """Gap of the first-regime Gaussian entropy ordering (closed forms only).

    Raises ``RegimeError`` for theta = 0. The certificate passes when the
    returned gap is >= ``-LEMMA_RTOL * scale`` (see ``lemma21_gap``).
    """
    return lemma21_gap(state, params, ct)[0]


def certify_lemma22(f, state: MacroState, params: ModelParams, grid: PhaseGrid,
                    H_f: float | None = None) -> tuple[float, float]:
    """``(H(MTheta) - H(M01), H(f) - H(MTheta))``; H(f) by quadrature."""
    if H_f is None:
        H_f = h_functional(f, grid)
    h_theta = h_closed_form("M_Theta", state, None, params)
    h01 = h_closed_form("M01", state, None, params)
    return h_theta - h01, H_f - h_theta


def theta_zero_factor(nu: float, d: int) -> float:
    """``max(nu, -(d-1) nu)`` of the theta = 0 Gaussian entropy ordering."""
    return max(nu, -(d - 1) * nu)


def lemma31_generic_difference(state: MacroState, params: ModelParams) -> float:
    """H(M00) - H(M_{nu,0}) from the generic closed forms."""
    p0 = ModelParams(params.d, params.delta, params.nu, 0.0, params.mu)
    return h_closed_form("M00", state, None, p0) - h_closed_form("M_nu_theta", state, None, p0)


def lemma31_explicit_difference(state: MacroState, params: ModelParams) -> float:
    """The branch-wise ``ln T_tr`` / ``ln det Theta`` expression for H(M00) - H(M_{nu,0}).

    ``(rho/2)(d(1-nu) ln T_tr + nu ln det Theta - d ln T_tr)`` for nu >= 0 and
    ``(rho/2)(d(1+(d-1)nu) ln T_tr - (d-1) nu ln det Theta - d ln T_tr)``
    for nu <= 0. By concavity of ln this never exceeds the generic
    difference, with equality for isotropic Theta or nu = 0.
    """
    d, nu, rho = state.d, params.nu, state.rho
    lt = math.log(state.T_tr)
    ldet = _theta_log_det(state)
    if nu >= 0:
        inner = d * (1.0 - nu) * lt + nu * ldet - d * lt
    else:
        inner = d * (1.0 + (d - 1) * nu) * lt - (d - 1) * nu * ldet - d * lt
    return 0.5 * rho * inner


def lemma31_gap(state: MacroState, params: ModelParams) -> tuple[float, float]:
    if params.theta != 0:
        raise RegimeError("theta > 0 belongs to the first regime; use certify_lemma21")
    hs = _closed_forms(state, params)
    lhs = hs["M00"] - hs["M_nu_theta"]
    rhs = theta_zero_factor(params.nu, state.d) * (hs["M00"] - hs["M_Theta"])
    return lhs - rhs, _lemma_scale(hs)


@dataclass(frozen=True)
class Lemma31Result:
    gap: float
    scale: float
    generic_difference: float
    explicit_difference: float

    @property
    def passed(self) -> bool:
        return self.gap >= -LEMMA_RTOL * self.scale

    @property
    def explicit_matches(self) -> bool:
        ref = max(abs(self.generic_difference), 1e-300)
        return abs(self.explicit_difference - self.generic_difference) <= LEMMA_RTOL * ref


def certify_lemma31(state: MacroState, params: ModelParams) -> Lemma31Result:
    gap, scale = lemma31_gap(state, params)
    return Lemma31Result(gap, scale, lemma31_generic_difference(state, params),
                         lemma31_explicit_difference(state, params))


def l1_distance(f, g, grid: PhaseGrid, mass_rtol: float = KULLBACK_MASS_RTOL) -> float:
    """``int |f - g|``; refuses pairs whose masses differ (Kullback hypothesis)."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    mf, mg = integrate(grid, f), integrate(grid, g)
    if abs(mf - mg) > mass_rtol * max(abs(mf), abs(mg)):
        raise KullbackHypothesisError(f"masses differ: {mf!r} vs {mg!r}")
    return integrate(grid, np.abs(f - g))


def kullback_bound(rel_h: float) -> float:
    return math.sqrt(2.0 * max(rel_h, 0.0))


@dataclass
class EntropyReport:
    """Entropy diagnostics of one distribution.

    ``H_M*`` are closed-form values; ``H_discrete`` holds the quadratures of
    the Gaussians actually constructed on the grid.
    """

    H_f: float
    H_M_nu_theta: float
    H_M01: float
    H_M00: float
    H_MTheta: float
    D: float
    rel_H01: float
    rel_H00: float
    A: float
    regime: str
    theorem_factor: float
    rel_H_target: float
    l1_to_target: float
    kullback_bound: float
    gaps: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    H_discrete: dict = field(default_factory=dict)
    clamp: dict = field(default_factory=dict)

    @property
    def theorem_gap(self) -> float:
        return self.gaps["theorem_gap"]

    @property
    def passed(self) -> bool:
        return all(self.certificates.values())

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items()}
        out["theorem_gap"] = self.theorem_gap
        out["passed"] = self.passed
        return out


def certify_theorem(f, state: MacroState, ct: CorrectedTensor | None, params: ModelParams,
                    grid: PhaseGrid, *, matched: bool = True, tol_quad: float | None = None,
                    M=None) -> EntropyReport:
    """Assemble the full entropy report and check the entropy-production bound.

    For theta > 0 the bound is ``D >= theta A H(f|M01)``; for theta = 0 it is
    ``D >= min(1 - nu, 1 + (d-1) nu) A H(f|M00)``. With ``matched`` (the
    default) the Gaussians are the grid moment-matched ones, so their discrete
    moments equal those of ``f``. ``M`` may pass an already built attractor.
    """
    f = np.asarray(f, dtype=np.float64)
    _check_nonneg(f)
    ct = ct if ct is not None else corrected_tensor(state, params)
    A = collision_frequency(state, params)
    G = {k: gaussian_factors(k, state, params, grid, ct=ct, matched=matched)
         for k in ("M_nu_theta", "M01", "M00")}
    H_M = G["M_nu_theta"].h(grid) if M is None else h_functional(M, grid)
    if M is None:
        M = G["M_nu_theta"].values(grid)

    # One logarithm of f serves H(f), D and both relative entropies; the
    # floor matches entropy_production.
    logf = np.maximum(f, LOG_FLOOR)
    np.log(logf, out=logf)
    wI = grid.I_weights
    marg = grid.v_marginal(f, np.stack([wI, wI * G["M01"].log_I, wI * G["M00"].log_I], axis=1))
    mass = grid.integrate_v(marg[:, 0])
    H_f = integrate(grid, f * logf)
    logf *= M - f
    D = -A * integrate(grid, logf)
    del logf
    clamp = (f < LOG_FLOOR) & (M > 0)
    n_clamped = int(clamp.sum())
    clamp_bias = (-A * integrate(grid, np.where(clamp, (M - f) * math.log(LOG_FLOOR), 0.0))
                  if n_clamped else 0.0)
    # H(f | G) = H(f) - int f ln G, the second term from the marginals of f.
    rel01 = H_f - G["M01"].cross(grid, mass, marg[:, 0], marg[:, 1])
    rel00 = H_f - G["M00"].cross(grid, mass, marg[:, 0], marg[:, 2])
    hs = _closed_forms(state, params, ct)
    tol = tol_quad if tol_quad is not None else default_tol_quad(state.rho, H_f)

    gaps, certs = {}, {}
    if params.theta > 0:
        regime, factor, rel_t, target = "theta_pos", params.theta, rel01, "M01"
        g21, scale = lemma21_gap(state, params, ct)
        gaps["lemma21_gap"] = g21
        certs["lemma21"] = g21 >= -LEMMA_RTOL * scale
    else:
        factor = min(1.0 - params.nu, 1.0 + (state.d - 1) * params.nu)
        regime, rel_t, target = "theta_zero", rel00, "M00"
        r31 = certify_lemma31(state, params)
        gaps["lemma31_gap"] = r31.gap
        certs["lemma31"] = r31.passed
    gaps["theorem_gap"] = D - factor * A * rel_t
    certs["theorem"] = gaps["theorem_gap"] >= -tol

    l22 = certify_lemma22(f, state, params, grid, H_f=H_f)
    gaps["lemma22_gaps"] = l22
    certs["lemma22"] = l22[0] >= -LEMMA_RTOL * _lemma_scale(hs) and l22[1] >= -tol
    gaps["convexity_gap"] = D - A * (H_f - H_M)
    certs["convexity"] = gaps["convexity_gap"] >= -tol
    certs["nonnegativity"] = rel01 >= -tol and rel00 >= -tol

    l1 = l1_distance(f, G[target].values(grid), grid)
    kb = kullback_bound(rel_t)
    gaps["kullback_gap"] = kb - l1
    certs["kullback"] = l1 <= kb + tol

    return EntropyReport(
        H_f=H_f, H_M_nu_theta=hs["M_nu_theta"], H_M01=hs["M01"], H_M00=hs["M00"],
        H_MTheta=hs["M_Theta"], D=D, rel_H01=rel01, rel_H00=rel00, A=A,
        regime=regime, theorem_factor=factor, rel_H_target=rel_t,
        l1_to_target=l1, kullback_bound=kb, gaps=gaps, certificates=certs,
        tolerances={"tol_quad": tol, "lemma_rtol": LEMMA_RTOL},
        H_discrete={"M_nu_theta": H_M, "M01": G["M01"].h(grid), "M00": G["M00"].h(grid)},
        clamp={"nodes": n_clamped, "bias": clamp_bias},
    )
