"""Scenario documents (JSON) and the named initial-condition families."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .gaussians import gaussian_values
from .moments import MacroState
from .phase_grid import (DEFAULT_PROFILE, GridError, GridSpec, ModelParams,
                         PhaseGrid, auto_bounds, build_grid)
from .solver import SolverConfig, TransportConfig

__all__ = [
    "ScenarioError",
    "Scenario",
    "FAMILIES",
    "random_spd",
    "random_rotation",
    "parse_scenario",
    "load_scenario",
    "mixture_components",
    "mixture_state",
    "initial_distribution",
]

FAMILIES = ("maxwellian01", "maxwellian00", "gaussian_theta", "bimodal", "random_mixture")


class ScenarioError(ValueError):
    """Scenario parse or validation failure; the message names the field."""


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    """Orthogonal matrix from the QR factorisation of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def random_spd(rng: np.random.Generator, d: int, T_scale: float = 1.0,
               eig_range=(0.2, 5.0)) -> np.ndarray:
    """SPD matrix with log-uniform eigenvalues in ``eig_range * T_scale``."""
    lo, hi = eig_range
    lam = T_scale * np.exp(rng.uniform(math.log(lo), math.log(hi), size=d))
    q = random_rotation(rng, d)
    m = (q * lam) @ q.T
    return 0.5 * (m + m.T)


def _get(obj: dict, key: str, where: str, default=Ellipsis):
    if key in obj:
        return obj[key]
    if default is Ellipsis:
        raise ScenarioError(f"{where}.{key}: missing required field")
    return default


def _number(value, where: str, positive=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number (got {value!r})")
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(f"{where}: must be finite (got {value!r})")
    if positive and not value > 0:
        raise ScenarioError(f"{where}: must be > 0 (got {value!r})")
    return value


def _vector(value, d: int, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float) if not isinstance(value, (int, float)) else np.full(d, float(value))
    if arr.shape != (d,) or not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{where}: expected {d} finite components (got {value!r})")
    return arr


def _matrix(value, d: int, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = float(arr) * np.eye(d)
    elif arr.shape == (d,):
        arr = np.diag(arr)
    if arr.shape != (d, d) or not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{where}: expected a {d}x{d} matrix, a diagonal or a scalar (got {value!r})")
    if not np.allclose(arr, arr.T, rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(arr))))):
        raise ScenarioError(f"{where}: matrix is not symmetric")
    if np.min(np.linalg.eigvalsh(arr)) <= 0:
        raise ScenarioError(f"{where}: matrix is not positive definite")
    return 0.5 * (arr + arr.T)


def _parse_params(obj: Any) -> ModelParams:
    if not isinstance(obj, dict):
        raise ScenarioError("params: expected an object")
    d = _get(obj, "d", "params", 3)
    if d not in (1, 2, 3) or isinstance(d, bool):
        raise ScenarioError(f"params.d: must be 1, 2 or 3 (got {d!r})")
    delta = _number(_get(obj, "delta", "params"), "params.delta")
    nu = _number(_get(obj, "nu", "params"), "params.nu")
    theta = _number(_get(obj, "theta", "params"), "params.theta")
    mu = _number(_get(obj, "mu", "params", 1.0), "params.mu")
    if not delta > 0:
        raise ScenarioError(f"params.delta: must be > 0 (got {delta!r})")
    if not -0.5 < nu < 1.0:
        raise ScenarioError(f"params.nu: must satisfy -1/2 < nu < 1 (got {nu!r})")
    if not 0.0 <= theta <= 1.0:
        raise ScenarioError(f"params.theta: must satisfy 0 <= theta <= 1 (got {theta!r})")
    if not mu > 0:
        raise ScenarioError(f"params.mu: must be > 0 (got {mu!r})")
    return ModelParams(int(d), delta, nu, theta, mu)


def _component(obj, d: int, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    comp = {
        "rho": _number(_get(obj, "rho", where, 1.0), f"{where}.rho", positive=True),
        "U": _vector(_get(obj, "U", where, 0.0), d, f"{where}.U"),
    }
    if "Theta" in obj:
        comp["Theta"] = _matrix(obj["Theta"], d, f"{where}.Theta")
    else:
        T = _number(_get(obj, "T", where), f"{where}.T", positive=True)
        comp["Theta"] = T * np.eye(d)
    T_int = _get(obj, "T_int", where, None)
    if T_int is None:
        T_int = float(np.trace(comp["Theta"])) / d
    comp["T_int"] = _number(T_int, f"{where}.T_int", positive=True)
    return comp


def mixture_components(initial: dict, d: int, seed: int) -> list[dict]:
    """Gaussian components ``{rho, U, Theta, T_int}`` of an initial family."""
    family = _get(initial, "family", "initial")
    where = "initial"
    if family == "maxwellian01":
        rho = _number(_get(initial, "rho", where, 1.0), f"{where}.rho", positive=True)
        T = _number(_get(initial, "T", where), f"{where}.T", positive=True)
        return [{"rho": rho, "U": _vector(_get(initial, "U", where, 0.0), d, f"{where}.U"),
                 "Theta": T * np.eye(d), "T_int": T}]
    if family == "maxwellian00":
        rho = _number(_get(initial, "rho", where, 1.0), f"{where}.rho", positive=True)
        T_tr = _number(_get(initial, "T_tr", where), f"{where}.T_tr", positive=True)
        T_int = _number(_get(initial, "T_int", where), f"{where}.T_int", positive=True)
        return [{"rho": rho, "U": _vector(_get(initial, "U", where, 0.0), d, f"{where}.U"),
                 "Theta": T_tr * np.eye(d), "T_int": T_int}]
    if family == "gaussian_theta":
        return [_component(initial, d, where)]
    if family == "bimodal":
        comps = _get(initial, "components", where)
        if not isinstance(comps, list) or len(comps) != 2:
            raise ScenarioError(f"{where}.components: bimodal needs exactly 2 components")
        return [_component(c, d, f"{where}.components[{i}]") for i, c in enumerate(comps)]
    if family == "random_mixture":
        k = _get(initial, "k", where)
        if isinstance(k, bool) or not isinstance(k, int) or not 1 <= k <= 16:
            raise ScenarioError(f"{where}.k: must be an integer in [1, 16] (got {k!r})")
        rho = _number(_get(initial, "rho", where, 1.0), f"{where}.rho", positive=True)
        T_scale = _number(_get(initial, "T_scale", where, 1.0), f"{where}.T_scale", positive=True)
        shift = _number(_get(initial, "shift", where, 1.0), f"{where}.shift")
        rng = np.random.default_rng(seed)
        weights = rng.dirichlet(np.full(k, 2.0))
        return [{"rho": rho * w,
                 "U": rng.uniform(-shift, shift, size=d) * math.sqrt(T_scale),
                 "Theta": random_spd(rng, d, T_scale, eig_range=(0.5, 1.5)),
                 "T_int": T_scale * math.exp(rng.uniform(math.log(0.6), math.log(1.5)))}
                for w in weights]
    raise ScenarioError(f"initial.family: unknown family {family!r}; expected one of {FAMILIES}")


def mixture_state(components: list[dict], delta: float) -> MacroState:
    """Exact (continuous) moments of a Gaussian mixture."""
    rho = sum(c["rho"] for c in components)
    U = sum(c["rho"] * c["U"] for c in components) / rho
    Theta = sum(c["rho"] * (c["Theta"] + np.outer(c["U"] - U, c["U"] - U)) for c in components) / rho
    T_int = sum(c["rho"] * c["T_int"] for c in components) / rho
    return MacroState.from_primitives(rho, U, Theta, T_int, delta)


def initial_distribution(components: list[dict], grid: PhaseGrid) -> np.ndarray:
    f = np.zeros(grid.shape)
    for c in components:
        f += gaussian_values(c["rho"], c["U"], c["Theta"], c["T_int"], grid)
    return f


@dataclass
class Scenario:
    params: ModelParams
    grid: Any                     # GridSpec or "auto"
    initial: dict
    solver: SolverConfig
    outputs: dict = field(default_factory=dict)
    seed: int = 0
    safety: float = 6.0
    source: Optional[str] = None

    def components(self) -> list[dict]:
        return mixture_components(self.initial, self.params.d, self.seed)

    def grid_spec(self) -> GridSpec:
        if isinstance(self.grid, GridSpec):
            return self.grid
        state = mixture_state(self.components(), self.params.delta)
        return auto_bounds(state, self.params, self.safety)

    def build(self) -> tuple[PhaseGrid, np.ndarray]:
        """Grid and initial distribution (one cell, or ``n_x`` cells with transport)."""
        grid = build_grid(self.grid_spec(), self.params)
        comps = self.components()
        f0 = initial_distribution(comps, grid)
        tr = self.solver.transport
        if tr is None:
            return grid, f0
        amp = float(self.initial.get("x_amplitude", 0.0))
        x = (np.arange(tr.n_x) + 0.5) / tr.n_x
        profile = 1.0 + amp * np.sin(2.0 * np.pi * x)
        return grid, profile.reshape((-1,) + (1,) * f0.ndim) * f0


def _parse_grid(obj, params: ModelParams):
    if obj == "auto" or obj is None:
        return "auto"
    if not isinstance(obj, dict):
        raise ScenarioError('grid: expected "auto" or an object')
    n_v_default, n_I_default = DEFAULT_PROFILE[params.d]
    try:
        return GridSpec(
            n_v=int(_get(obj, "n_v", "grid", n_v_default)),
            L_v=_number(_get(obj, "L_v", "grid"), "grid.L_v"),
            center=tuple(_vector(_get(obj, "center", "grid", 0.0), params.d, "grid.center")),
            n_I=int(_get(obj, "n_I", "grid", n_I_default)),
            I_max=_number(_get(obj, "I_max", "grid"), "grid.I_max"),
        )
    except GridError as exc:
        raise ScenarioError(f"grid: {exc}") from None


def _parse_solver(obj, params: ModelParams) -> SolverConfig:
    if not isinstance(obj, dict):
        raise ScenarioError("solver: expected an object")
    tr = obj.get("transport")
    transport = None
    if tr is not None:
        if not isinstance(tr, dict):
            raise ScenarioError("solver.transport: expected an object or null")
        n_x = _get(tr, "n_x", "solver.transport")
        if isinstance(n_x, bool) or not isinstance(n_x, int) or n_x < 1:
            raise ScenarioError(f"solver.transport.n_x: must be a positive integer (got {n_x!r})")
        dx = _number(_get(tr, "dx", "solver.transport"), "solver.transport.dx", positive=True)
        if not tr.get("periodic", True):
            raise ScenarioError("solver.transport.periodic: only periodic boundaries are supported")
        transport = TransportConfig(n_x, dx)
    scheme = obj.get("scheme", "exponential")
    if scheme not in ("exponential", "rk4"):
        raise ScenarioError(f"solver.scheme: must be 'exponential' or 'rk4' (got {scheme!r})")
    report_every = obj.get("report_every", 10)
    if isinstance(report_every, bool) or not isinstance(report_every, int) or report_every < 1:
        raise ScenarioError(f"solver.report_every: must be an integer >= 1 (got {report_every!r})")
    tol = obj.get("tol_quad")
    return SolverConfig(
        dt=_number(_get(obj, "dt", "solver"), "solver.dt", positive=True),
        t_end=_number(_get(obj, "t_end", "solver"), "solver.t_end"),
        params=params,
        scheme=scheme,
        report_every=report_every,
        transport=transport,
        matched=bool(obj.get("matched", True)),
        track_entropy=bool(obj.get("track_entropy", False)),
        tol_quad=None if tol is None else _number(tol, "solver.tol_quad", positive=True),
    )


def parse_scenario(doc: dict, source: Optional[str] = None) -> Scenario:
    """Validate a decoded scenario document.

    Every parameter is checked before anything is allocated.
    """
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: top level must be an object")
    params = _parse_params(_get(doc, "params", "scenario"))
    grid = _parse_grid(doc.get("grid", "auto"), params)
    initial = _get(doc, "initial", "scenario")
    if not isinstance(initial, dict):
        raise ScenarioError("initial: expected an object")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError(f"seed: must be an integer (got {seed!r})")
    solver = _parse_solver(_get(doc, "solver", "scenario"), params)
    outputs = doc.get("outputs", {})
    if not isinstance(outputs, dict):
        raise ScenarioError("outputs: expected an object")
    safety = _number(doc.get("safety", 6.0), "safety")
    if safety < 4:
        raise ScenarioError(f"safety: must be >= 4 (got {safety!r})")
    # Validate the initial family (and its matrices) now.
    comps = mixture_components(initial, params.d, seed)
    if "x_amplitude" in initial:
        amp = _number(initial["x_amplitude"], "initial.x_amplitude")
        if not 0 <= amp < 1:
            raise ScenarioError(f"initial.x_amplitude: must be in [0, 1) (got {amp!r})")
    del comps
    return Scenario(params, grid, initial, solver, outputs, seed, safety, source)


def load_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_scenario(doc, source=str(path))
