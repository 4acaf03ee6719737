"""Macroscopic fields, relaxation temperatures and collision frequency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import jacobi_eigh
from .phase_grid import ModelParams, PhaseGrid

__all__ = [
    "VACUUM_FLOOR",
    "VacuumError",
    "DefinitenessError",
    "MomentError",
    "MacroState",
    "CorrectedTensor",
    "compute_moments",
    "corrected_tensor",
    "collision_frequency",
]

VACUUM_FLOOR = 1e-12


class MomentError(ArithmeticError):
    pass


class VacuumError(MomentError):
    pass


class DefinitenessError(MomentError):
    """A temperature tensor that should be positive definite is not."""


@dataclass(frozen=True)
class MacroState:
    """Moments of one spatial cell.

    Temperatures are derived from the specific energies, so
    ``trace(Theta) = d T_tr`` and ``(d + delta) T_delta = d T_tr + delta T_int``
    hold to rounding by construction.
    """

    rho: float
    U: np.ndarray
    Theta: np.ndarray
    E_tr: float
    E_int: float
    E_delta: float
    T_tr: float
    T_int: float
    T_delta: float

    @property
    def d(self) -> int:
        return len(self.U)

    @classmethod
    def from_primitives(cls, rho, U, Theta, T_int, delta) -> "MacroState":
        """State with the given density, bulk velocity, stress tensor and T_int."""
        U = np.atleast_1d(np.asarray(U, dtype=float)).copy()
        Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
        Theta = 0.5 * (Theta + Theta.T)
        d = len(U)
        if Theta.shape != (d, d):
            raise ValueError(f"Theta has shape {Theta.shape}, expected {(d, d)}")
        E_tr = 0.5 * float(np.trace(Theta))
        E_int = 0.5 * delta * float(T_int)
        return _from_energies(float(rho), U, Theta, E_tr, E_int, d, delta)


def _from_energies(rho, U, Theta, E_tr, E_int, d, delta) -> MacroState:
    E_delta = E_tr + E_int
    U.setflags(write=False)
    Theta.setflags(write=False)
    return MacroState(
        rho=rho, U=U, Theta=Theta,
        E_tr=E_tr, E_int=E_int, E_delta=E_delta,
        T_tr=2.0 * E_tr / d,
        T_int=2.0 * E_int / delta,
        T_delta=2.0 * E_delta / (d + delta),
    )


def compute_moments(f, grid: PhaseGrid, params: ModelParams) -> MacroState:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != grid.shape:
        raise ValueError(f"f has shape {f.shape}, grid has shape {grid.shape}")
    marg = grid.v_marginal(f, np.stack([grid.I_weights, grid.I_weights * grid.energy], axis=1))
    fv, fe = marg[:, 0], marg[:, 1]
    rho = grid.integrate_v(fv)
    if not np.isfinite(rho):
        raise MomentError(f"non-finite density {rho!r}")
    if rho < VACUUM_FLOOR:
        raise VacuumError(f"density {rho:.3e} below vacuum floor {VACUUM_FLOOR:.0e}")

    pts = grid.v_points
    U = grid.v_cell * (fv @ pts) / rho
    c = pts - U
    Theta = grid.v_cell * ((c * fv[:, None]).T @ c) / rho
    Theta = 0.5 * (Theta + Theta.T)
    E_tr = 0.5 * float(np.trace(Theta))
    E_int = grid.integrate_v(fe) / rho
    if not (np.all(np.isfinite(Theta)) and np.isfinite(E_int)):
        raise MomentError("non-finite second moments")
    return _from_energies(rho, U, Theta, E_tr, E_int, params.d, params.delta)


@dataclass(frozen=True)
class CorrectedTensor:
    T_relax: float
    Tensor: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def corrected_tensor(state: MacroState, params: ModelParams) -> CorrectedTensor:
    """Relaxation temperature and corrected temperature tensor of the attractor."""
    th, nu = params.theta, params.nu
    d = state.d
    eye = np.eye(d)
    T_relax = th * state.T_delta + (1.0 - th) * state.T_int
    tensor = th * state.T_delta * eye + (1.0 - th) * ((1.0 - nu) * state.T_tr * eye + nu * state.Theta)
    tensor = 0.5 * (tensor + tensor.T)
    w, vecs = jacobi_eigh(tensor)
    if not w[0] > 0:
        raise DefinitenessError(
            f"corrected tensor not positive definite for nu={nu}, theta={th}: eigenvalues {w}")
    if not T_relax > 0:
        raise DefinitenessError(f"relaxation temperature {T_relax} is not positive")
    for a in (tensor, w, vecs):
        a.setflags(write=False)
    return CorrectedTensor(T_relax, tensor, w, vecs)


def collision_frequency(state: MacroState, params: ModelParams) -> float:
    denom = params.mu * (1.0 - params.nu + params.theta * params.nu)
    if not (state.rho > 0 and state.T_delta > 0 and denom > 0):
        raise MomentError(
            f"collision frequency undefined (rho={state.rho}, T_delta={state.T_delta}, denom={denom})")
    return state.rho * state.T_delta / denom
