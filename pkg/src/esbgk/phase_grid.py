"""Discrete phase space (v, I) for the polyatomic ES-BGK model.

Velocity axes use a uniform midpoint rule on the box ``[c - L_v, c + L_v]^d``.
The internal-energy axis is cell-centred in the variable
``s = sqrt(I^(2/delta) / eps_max)`` so that the internal factor
``exp(-I^(2/delta) / T)`` is resolved the same way for every ``delta``;
each I-weight is the exact measure of its cell, so the weights still sum to
``I_max``.

Node ordering is row-major over ``(v_1, ..., v_d, I)``: I is the fastest
index, then the velocity axes from last to first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .linalg import jacobi_eigh

__all__ = [
    "GridError",
    "ModelParams",
    "GridSpec",
    "PhaseGrid",
    "DistSnapshot",
    "DEFAULT_PROFILE",
    "MIN_NODES",
    "TAIL_TOLERANCE",
    "build_grid",
    "integrate",
    "auto_bounds",
]

MIN_NODES = 8
# Internal-energy tail: exp(-I_max^(2/delta) / T*) below this.
TAIL_TOLERANCE = 1e-12
# (n_v per axis, n_I) per velocity dimension.
DEFAULT_PROFILE = {1: (256, 256), 2: (64, 128), 3: (32, 128)}


class GridError(ValueError):
    """Invalid model parameters, grid specification or grid function."""


@dataclass(frozen=True)
class ModelParams:
    """Free parameters of the polyatomic ES-BGK model.

    ``nu`` is the Prandtl-number correction, ``theta`` the translational /
    internal relaxation parameter, ``delta`` the number of internal degrees
    of freedom and ``mu`` the viscosity.
    """

    d: int = 3
    delta: float = 2.0
    nu: float = 0.0
    theta: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise GridError(f"d must be 1, 2 or 3 (got {self.d!r})")
        if not self.delta > 0:
            raise GridError(f"delta must be > 0 (got {self.delta!r})")
        if not -0.5 < self.nu < 1.0:
            raise GridError(f"nu must satisfy -1/2 < nu < 1 (got {self.nu!r})")
        if not 0.0 <= self.theta <= 1.0:
            raise GridError(f"theta must satisfy 0 <= theta <= 1 (got {self.theta!r})")
        if not self.mu > 0:
            raise GridError(f"mu must be > 0 (got {self.mu!r})")


@dataclass(frozen=True)
class GridSpec:
    n_v: int
    L_v: float
    center: tuple
    n_I: int
    I_max: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.n_v < MIN_NODES or self.n_I < MIN_NODES:
            raise GridError(
                f"node counts must be >= {MIN_NODES} (got n_v={self.n_v}, n_I={self.n_I})")
        if not self.L_v > 0:
            raise GridError(f"L_v must be > 0 (got {self.L_v!r})")
        if not self.I_max > 0:
            raise GridError(f"I_max must be > 0 (got {self.I_max!r})")

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.n_v * factor, self.L_v, self.center, self.n_I * factor, self.I_max)


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Immutable tensor grid over velocity and internal energy."""

    spec: GridSpec
    delta: float
    v_axes: tuple           # d arrays of cell centres
    h_v: float              # velocity cell width (same on every axis)
    I_nodes: np.ndarray
    I_weights: np.ndarray
    energy: np.ndarray = field(repr=False)   # I^(2/delta) at the I nodes

    @property
    def d(self) -> int:
        return len(self.v_axes)

    @property
    def v_shape(self) -> tuple:
        return tuple(len(a) for a in self.v_axes)

    @property
    def shape(self) -> tuple:
        return self.v_shape + (len(self.I_nodes),)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def v_cell(self) -> float:
        """Velocity cell volume h_v^d."""
        return self.h_v ** self.d

    @cached_property
    def v_points(self) -> np.ndarray:
        """Velocity nodes as an ``(n_v^d, d)`` array in node order."""
        mesh = np.meshgrid(*self.v_axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def weights(self) -> np.ndarray:
        """Full product weight array; allocated on demand."""
        w = np.full(self.v_shape, self.v_cell)[..., None] * self.I_weights
        w.setflags(write=False)
        return w

    def box_measure(self) -> float:
        return (2.0 * self.spec.L_v) ** self.d * self.spec.I_max

    def v_marginal(self, values: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
        """Contract the I axis: ``sum_k w_k g_k values[..., k]`` (flat over v)."""
        w = self.I_weights if weights is None else weights
        return np.reshape(values, (-1, len(self.I_nodes))) @ w

    def integrate_v(self, values: np.ndarray) -> float:
        """Midpoint velocity integral of a flat velocity-grid function."""
        return float(self.v_cell * np.sum(values))


def build_grid(spec: GridSpec, params: ModelParams) -> PhaseGrid:
    d = params.d
    if len(spec.center) == 1 and d > 1:
        center = spec.center * d
    else:
        center = spec.center
    if len(center) != d:
        raise GridError(f"center has {len(center)} components, expected {d}")
    spec = GridSpec(spec.n_v, spec.L_v, center, spec.n_I, spec.I_max)

    h = 2.0 * spec.L_v / spec.n_v
    offsets = (np.arange(spec.n_v) + 0.5) * h - spec.L_v
    axes = tuple(c + offsets for c in center)
    for a in axes:
        a.setflags(write=False)

    # s-cells on [0, 1]; I = I_max s^delta, i.e. I^(2/delta) = eps_max s^2.
    n = spec.n_I
    edges = np.arange(n + 1) / n
    s = (np.arange(n) + 0.5) / n
    I_nodes = spec.I_max * s ** params.delta
    I_weights = np.diff(spec.I_max * edges ** params.delta)
    energy = spec.I_max ** (2.0 / params.delta) * s ** 2
    for a in (I_nodes, I_weights, energy):
        a.setflags(write=False)
    return PhaseGrid(spec, float(params.delta), axes, h, I_nodes, I_weights, energy)


def _check_finite(grid: PhaseGrid, vals: np.ndarray) -> None:
    finite = np.isfinite(vals)
    if not finite.all():
        flat = int(np.argmin(finite.ravel()))
        idx = np.unravel_index(flat, vals.shape)
        raise GridError(f"non-finite value {vals.ravel()[flat]!r} at node {tuple(int(i) for i in idx)}")


def integrate(grid: PhaseGrid, values) -> float:
    """Quadrature ``sum_{j,k} w_{j,k} values_{j,k}`` over the whole grid.

    The I axis is contracted first for every velocity node, then the
    velocity partial sums are reduced with numpy's pairwise summation. The
    order is fixed, so repeated calls are bit-identical.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.shape != grid.shape:
        vals = np.broadcast_to(vals, grid.shape)
    total = grid.integrate_v(grid.v_marginal(vals))
    if not np.isfinite(total):
        # A finite total implies finite summands; only scan on failure.
        _check_finite(grid, vals)
        raise GridError(f"quadrature overflowed to {total!r}")
    return total


def auto_bounds(state, params: ModelParams, safety: float = 6.0,
                counts: Optional[Sequence[int]] = None) -> GridSpec:
    """Size a grid around a macroscopic state.

    The velocity box is centred on the bulk velocity with half-width
    ``safety * sqrt(max(lambda_max(Theta), T_delta))``; ``I_max`` puts the
    internal tail below ``TAIL_TOLERANCE`` at ``T* = max(T_int, T_delta)``.
    """
    if safety < 4:
        raise GridError(f"safety must be >= 4 (got {safety!r})")
    theta = np.atleast_2d(np.asarray(state.Theta, dtype=float))
    lam_max = float(jacobi_eigh(theta)[0][-1])
    T_int, T_delta = float(state.T_int), float(state.T_delta)
    if not (lam_max > 0 and T_int > 0 and T_delta > 0):
        raise GridError(
            f"temperatures must be positive (lambda_max={lam_max}, T_int={T_int}, T_delta={T_delta})")
    n_v, n_I = counts if counts is not None else DEFAULT_PROFILE[params.d]
    L_v = safety * math.sqrt(max(lam_max, T_delta))
    t_star = max(T_int, T_delta)
    # exp(-I_max^(2/delta) / T*) = TAIL_TOLERANCE, padded by one ulp-ish factor.
    eps_max = -math.log(TAIL_TOLERANCE) * t_star * (1.0 + 1e-9)
    I_max = eps_max ** (params.delta / 2.0)
    return GridSpec(int(n_v), L_v, tuple(np.atleast_1d(state.U).astype(float)), int(n_I), I_max)


@dataclass
class DistSnapshot:
    """Distribution values on a grid, one block per spatial cell.

    ``values`` has shape ``grid.shape`` for a homogeneous run or
    ``(n_x,) + grid.shape`` with transport.
    """

    values: np.ndarray
    grid: PhaseGrid
    params: ModelParams
    dx: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape == self.grid.shape:
            pass
        elif self.values.shape[1:] != self.grid.shape:
            raise GridError(
                f"values shape {self.values.shape} does not match grid shape {self.grid.shape}")
        if np.any(self.values < 0):
            raise GridError("distribution values must be nonnegative")

    @property
    def n_x(self) -> int:
        return 1 if self.values.shape == self.grid.shape else self.values.shape[0]

    def cells(self) -> np.ndarray:
        return self.values.reshape((self.n_x,) + self.grid.shape)
