"""Randomised certificate sweeps and grid-refinement studies."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .entropy import (KINDS, LEMMA_RTOL, certify_lemma31, h_closed_form,
                      lemma21_gap)
from .gaussians import GaussianFactors, gaussian_log_factors, target_parameters
from .moments import MacroState, corrected_tensor
from .phase_grid import (DEFAULT_PROFILE, GridSpec, ModelParams, PhaseGrid,
                         auto_bounds, build_grid)
from .scenario import random_spd

__all__ = [
    "REGIMES",
    "DEFAULT_RANGES",
    "random_state",
    "SweepSummary",
    "certify_sweep",
    "gaussian_h_discrete",
    "RefinementStudy",
    "refinement_study",
]

REGIMES = ("theta_pos", "theta_zero")

DEFAULT_RANGES = {
    "nu": (-0.49, 0.99),
    "theta": (0.0, 1.0),      # sampled in (lo, hi]; ignored for theta_zero
    "delta": (0.5, 6.0),
    "rho": (0.1, 10.0),
    "T_scale": (0.2, 5.0),
    "d": 3,
}


def _log_uniform(rng, lo, hi):
    return math.exp(rng.uniform(math.log(lo), math.log(hi)))


def random_state(rng: np.random.Generator, d: int, delta: float, ranges=None) -> MacroState:
    """Random admissible moment state: SPD Theta from a rotated diagonal, log-uniform T_int."""
    r = {**DEFAULT_RANGES, **(ranges or {})}
    T_scale = _log_uniform(rng, *r["T_scale"])
    rho = _log_uniform(rng, *r["rho"])
    U = rng.uniform(-1.0, 1.0, size=d) * math.sqrt(T_scale)
    Theta = random_spd(rng, d, T_scale)
    T_int = T_scale * _log_uniform(rng, 0.2, 5.0)
    return MacroState.from_primitives(rho, U, Theta, T_int, delta)


def _sample_params(rng, regime, r) -> ModelParams:
    lo, hi = r["nu"]
    nu = rng.uniform(lo, hi)
    if regime == "theta_zero":
        theta = 0.0
    else:
        t_lo, t_hi = r["theta"]
        theta = t_hi - (t_hi - t_lo) * rng.random()  # (lo, hi]
    return ModelParams(int(r["d"]), _log_uniform(rng, *r["delta"]), nu, theta, 1.0)


@dataclass
class SweepSummary:
    regime: str
    n_samples: int
    seed: int
    min_gap: float
    min_relative_gap: float
    failures: int
    explicit_mismatches: int = 0
    max_explicit_rel_diff: float = 0.0
    errors: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"passed": self.passed}


def certify_sweep(n_samples: int, seed: int, regime: str, ranges=None) -> SweepSummary:
    """Closed-form Gaussian-ordering certificate over seeded random states.

    Sample ``i`` draws from its own generator spawned from ``seed``, so any
    sample can be reproduced in isolation. A sample fails when its gap is
    below ``-LEMMA_RTOL`` times the largest entropy magnitude involved, or
    when the closed forms raise.
    """
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES} (got {regime!r})")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1 (got {n_samples!r})")
    r = {**DEFAULT_RANGES, **(ranges or {})}
    lo, hi = r["nu"]
    if not -0.5 < lo <= hi < 1.0:
        raise ValueError(f"nu range {r['nu']} must lie inside (-1/2, 1)")
    t_lo, t_hi = r["theta"]
    if regime == "theta_pos" and not (0.0 <= t_lo <= t_hi <= 1.0 and t_hi > 0.0):
        raise ValueError(f"theta range {r['theta']} must lie inside [0, 1] with a positive upper end")
    t0 = time.perf_counter()
    min_gap = math.inf
    min_rel = math.inf
    failures = 0
    mismatches = 0
    max_diff = 0.0
    errors = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_samples)):
        rng = np.random.default_rng(child)
        try:
            params = _sample_params(rng, regime, r)
            state = random_state(rng, params.d, params.delta, r)
            if regime == "theta_pos":
                gap, scale = lemma21_gap(state, params)
                ok = gap >= -LEMMA_RTOL * scale
            else:
                res = certify_lemma31(state, params)
                gap, scale, ok = res.gap, res.scale, res.passed
                ref = max(abs(res.generic_difference), 1e-300)
                diff = abs(res.explicit_difference - res.generic_difference) / ref
                max_diff = max(max_diff, diff)
                mismatches += not res.explicit_matches
        except (ArithmeticError, ValueError) as exc:
            failures += 1
            errors.append(f"sample {i}: {type(exc).__name__}: {exc}")
            continue
        min_gap = min(min_gap, gap)
        min_rel = min(min_rel, gap / scale)
        failures += not ok
    return SweepSummary(regime, n_samples, seed, min_gap, min_rel, failures,
                        mismatches, max_diff, errors, time.perf_counter() - t0)


def gaussian_h_discrete(rho, U, cov, T_I, grid: PhaseGrid, eig=None) -> float:
    """Grid quadrature of ``M ln M`` for a raw Gaussian without forming ``M``.

    ``ln M = ln rho + log g_v + log g_I`` splits the double sum into
    one-dimensional sums over velocity nodes and internal-energy nodes.
    """
    lv, lI = gaussian_log_factors(U, cov, T_I, grid, eig)
    return GaussianFactors(float(rho), lv, lI).h(grid)


@dataclass
class RefinementStudy:
    base: GridSpec
    refined: GridSpec
    closed: dict
    err_base: dict
    err_refined: dict

    @property
    def ratios(self) -> dict:
        return {k: abs(self.err_base[k]) / abs(self.err_refined[k])
                if self.err_refined[k] != 0 else math.inf for k in self.closed}

    def relative_errors(self, which="base") -> dict:
        errs = self.err_base if which == "base" else self.err_refined
        return {k: abs(errs[k]) / (1.0 + abs(self.closed[k])) for k in self.closed}

    @property
    def suggested_tol_quad(self) -> float:
        """Relative quadrature tolerance for the base grid: twice the worst observed error."""
        return 2.0 * max(self.relative_errors("base").values())

    def to_dict(self) -> dict:
        return {
            "base": dict(self.base.__dict__), "refined": dict(self.refined.__dict__),
            "H_closed": self.closed, "err_base": self.err_base, "err_refined": self.err_refined,
            "ratios": self.ratios, "relative_error_base": self.relative_errors("base"),
            "relative_error_refined": self.relative_errors("refined"),
            "suggested_tol_quad": self.suggested_tol_quad,
        }


def refinement_study(state: MacroState, params: ModelParams, spec: GridSpec | None = None,
                     factor: int = 2, kinds=KINDS) -> RefinementStudy:
    """Discrete-minus-closed-form H of each Gaussian kind on a grid and its refinement."""
    if spec is None:
        spec = auto_bounds(state, params, counts=DEFAULT_PROFILE[params.d])
    ct = corrected_tensor(state, params)
    fine = spec.refined(factor)
    closed = {k: h_closed_form(k, state, ct, params) for k in kinds}
    errs = []
    for s in (spec, fine):
        grid = build_grid(s, params)
        e = {}
        for k in kinds:
            cov, T_I = target_parameters(k, state, params, ct)
            eig = (ct.eigenvalues, ct.eigenvectors) if k == "M_nu_theta" else None
            e[k] = float(gaussian_h_discrete(state.rho, state.U, cov, T_I, grid, eig) - closed[k])
        errs.append(e)
    return RefinementStudy(spec, fine, closed, errs[0], errs[1])
