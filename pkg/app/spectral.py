########################
# Cosine Spectral Ops  #
########################

"""
Orthonormal cosine transforms and the Neumann Laplacian they diagonalize.

Mid-point grid (N cells): C_N has entries sqrt(2/(N a_m)) cos(m(j+1/2)pi/N)
with a_0 = 2. C_N is orthogonal, so x = C_N k is the orthonormal DCT-3 and
k = C_N^T x is the orthonormal DCT-2.

Regular grid (N intervals, N+1 vertices): C_N has entries
sqrt(2/(N a_j a_m)) cos(j m pi/N) with a = 2 at both ends. C_N is symmetric
and its own inverse. It is evaluated through the unnormalized DCT-1 as
C x = sqrt(2/N)/sqrt(a) * DCT1(sqrt(a) x / 2).

Along each axis the second-derivative matrix is C Lambda C^{-1} (mid-point)
or T C Lambda C^{-1} T^{-1} with T = diag(sqrt(a_j)) (regular), where
Lambda = diag(-(j mu)^2) and mu = pi / axis extent.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy import fft

from app.exceptions import DimensionError, ValidationError
from app.grid import Family, Field, GridSpec, _endpoint_factors

DENSE_ORACLE_LIMIT = 64


@dataclass(frozen=True, eq=False)
class TransformPlan:
    """
    Precomputed per-axis data for one grid family and resolution.

    Attributes:
        axis_length (int): Number of nodes along the axis (N or N+1).
        intervals (int): Number of cells N.
        grid_family (Family): Mid-point or regular.
        extent (float): Axis length b - a.
        wavenumbers (np.ndarray): j * mu for every mode.
        eigenvalues (np.ndarray): -(j * mu)**2 for every mode.
        scaling (np.ndarray): sqrt(a_j), the diagonal of T (ones on the mid-point grid).
    """

    axis_length: int
    intervals: int
    grid_family: Family
    extent: float
    wavenumbers: np.ndarray
    eigenvalues: np.ndarray
    scaling: np.ndarray

    @property
    def mu(self) -> float:
        return np.pi / self.extent


@lru_cache(maxsize=None)
def make_plan(intervals: int, family: Family, extent: float) -> TransformPlan:
    """
    Build (once) the transform plan for an axis.

    Args:
        intervals (int): Number of cells along the axis.
        family (Family): Grid family.
        extent (float): Axis length.

    Returns:
        TransformPlan: Immutable plan, shared by every caller.
    """
    family = Family(family)
    if intervals < 1:
        raise ValidationError(f"Axis needs at least one interval, got {intervals}")
    length = intervals if family is Family.MID_POINT else intervals + 1
    mu = np.pi / extent
    wavenumbers = mu * np.arange(length)
    eigenvalues = -wavenumbers ** 2
    if family is Family.MID_POINT:
        scaling = np.ones(length)
    else:
        scaling = np.sqrt(_endpoint_factors(intervals))
    for array in (wavenumbers, eigenvalues, scaling):
        array.setflags(write=False)
    return TransformPlan(
        axis_length=length,
        intervals=intervals,
        grid_family=family,
        extent=float(extent),
        wavenumbers=wavenumbers,
        eigenvalues=eigenvalues,
        scaling=scaling,
    )


def plan_for(grid: GridSpec, axis: Union[int, str]) -> TransformPlan:
    """Plan for the x (0) or y (1) axis of a grid."""
    axis = _axis_index(axis)
    if axis == 0:
        return make_plan(grid.nx, grid.family, grid.domain.b - grid.domain.a)
    return make_plan(grid.ny, grid.family, grid.domain.d - grid.domain.c)


def _axis_index(axis: Union[int, str]) -> int:
    lookup = {0: 0, 1: 1, 'x': 0, 'y': 1}
    if axis not in lookup:
        raise ValidationError(f"axis must be 'x' or 'y', got {axis!r}")
    return lookup[axis]


def _along(vector: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    """Reshape a per-axis vector to broadcast along `axis` of an ndim array."""
    shape = [1] * ndim
    shape[axis] = vector.size
    return vector.reshape(shape)


def _check(values: np.ndarray, plan: TransformPlan, family: Family, axis: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if plan.grid_family is not family:
        raise ValidationError(
            f"Plan is for the {plan.grid_family.value} grid, expected {family.value}"
        )
    if values.ndim == 0 or values.shape[axis] != plan.axis_length:
        raise DimensionError(
            f"Expected length {plan.axis_length} along axis {axis}, got shape {values.shape}"
        )
    return values


def dct_mid_forward(values: np.ndarray, plan: TransformPlan, axis: int = 0) -> np.ndarray:
    """
    Coefficients k = C_N^{-1} x on the mid-point grid (orthonormal DCT-2).

    Raises:
        DimensionError: If the length along `axis` does not match the plan.
    """
    values = _check(values, plan, Family.MID_POINT, axis)
    return fft.dct(values, type=2, norm='ortho', axis=axis)


def dct_mid_inverse(coeffs: np.ndarray, plan: TransformPlan, axis: int = 0) -> np.ndarray:
    """
    Samples x = C_N k on the mid-point grid (orthonormal DCT-3).

    Raises:
        DimensionError: If the length along `axis` does not match the plan.
    """
    coeffs = _check(coeffs, plan, Family.MID_POINT, axis)
    return fft.idct(coeffs, type=2, norm='ortho', axis=axis)


def dct_reg_forward(values: np.ndarray, plan: TransformPlan, axis: int = 0) -> np.ndarray:
    """
    Apply the symmetric, self-inverse regular-grid matrix C_N (DCT-1 family).

    Raises:
        DimensionError: If the length along `axis` does not match the plan.
    """
    values = _check(values, plan, Family.REGULAR, axis)
    scale = _along(plan.scaling, axis, values.ndim)
    transformed = fft.dct(values * scale / 2.0, type=1, axis=axis)
    return np.sqrt(2.0 / plan.intervals) * transformed / scale


# C_N is an involution on the regular grid
dct_reg_inverse = dct_reg_forward


def _to_modes(data: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Cosine coefficients of symmetrized data along both axes."""
    for axis in (0, 1):
        plan = plan_for(grid, axis)
        if grid.family is Family.MID_POINT:
            data = dct_mid_forward(data, plan, axis=axis)
        else:
            data = dct_reg_forward(data, plan, axis=axis)
    return data


def _from_modes(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    for axis in (0, 1):
        plan = plan_for(grid, axis)
        if grid.family is Family.MID_POINT:
            coeffs = dct_mid_inverse(coeffs, plan, axis=axis)
        else:
            coeffs = dct_reg_inverse(coeffs, plan, axis=axis)
    return coeffs


@lru_cache(maxsize=32)
def _symbol(grid: GridSpec) -> np.ndarray:
    """Eigenvalues of the 2D Laplacian on mode (j, k): -(j mu_x)^2 - (k mu_y)^2."""
    symbol = (
        plan_for(grid, 0).eigenvalues[:, np.newaxis]
        + plan_for(grid, 1).eigenvalues[np.newaxis, :]
    )
    symbol.setflags(write=False)
    return symbol


@lru_cache(maxsize=32)
def _t_scaling(grid: GridSpec) -> np.ndarray:
    """T_x (.) T_y as an elementwise factor field."""
    scaling = np.outer(plan_for(grid, 0).scaling, plan_for(grid, 1).scaling)
    scaling.setflags(write=False)
    return scaling


def apply_symbol(data: np.ndarray, grid: GridSpec, multiplier: np.ndarray) -> np.ndarray:
    """
    Apply a diagonal-in-cosine-modes operator to raw grid data.

    On the regular grid the T-scaling is applied before and after, so the
    result acts on u-space data.
    """
    if grid.family is Family.REGULAR:
        scaling = _t_scaling(grid)
        return scaling * _from_modes(multiplier * _to_modes(data / scaling, grid), grid)
    return _from_modes(multiplier * _to_modes(data, grid), grid)


def _resolve_grid(field: Field, grid: Optional[GridSpec]) -> GridSpec:
    if grid is not None and grid != field.grid:
        raise DimensionError(
            f"Field shape {field.data.shape} belongs to another grid than {grid}"
        )
    return field.grid


def laplacian(field: Field, grid: Optional[GridSpec] = None) -> Field:
    """
    Spectral Neumann Laplacian of a field.

    Args:
        field (Field): Grid function.
        grid (Optional[GridSpec]): Expected grid; must match the field's.

    Returns:
        Field: D2x u + u D2y^T on the field's grid.
    """
    grid = _resolve_grid(field, grid)
    return field.like(apply_symbol(field.data, grid, _symbol(grid)))


def helmholtz_solve(rhs: Field, c: float, grid: Optional[GridSpec] = None) -> Field:
    """
    Solve (I - c Laplacian) w = rhs.

    Every cosine coefficient (j, k) is divided by 1 + c (j mu_x)^2 + c (k mu_y)^2.

    Raises:
        ValidationError: If c is not positive.
    """
    if not c > 0:
        raise ValidationError(f"Helmholtz shift c must be positive, got {c}")
    grid = _resolve_grid(rhs, grid)
    return rhs.like(apply_symbol(rhs.data, grid, 1.0 / (1.0 - c * _symbol(grid))))


def dense_diff_matrix(grid: GridSpec, axis: Union[int, str]) -> np.ndarray:
    """
    Second-derivative matrix of the interpolation basis along one axis.

    Entry (j, m) is the second derivative of basis function m at node j,
    assembled directly from the cosine-sum definition of the basis. Meant
    as a test oracle; it is O(N^2) to build.

    Raises:
        ValidationError: If the axis has more than 64 intervals.
    """
    plan = plan_for(grid, axis)
    n = plan.intervals
    if n > DENSE_ORACLE_LIMIT:
        raise ValidationError(f"Dense oracle limited to {DENSE_ORACLE_LIMIT} intervals, got {n}")
    modes = np.arange(plan.axis_length)
    if grid.family is Family.MID_POINT:
        phase = (np.arange(n) + 0.5) * np.pi / n
        mode_factors = np.where(modes == 0, 2.0, 1.0)
        node_factors = np.ones(n)
    else:
        phase = np.arange(n + 1) * np.pi / n
        mode_factors = _endpoint_factors(n)
        node_factors = _endpoint_factors(n)
    # cos(m mu (x_j - a)) for node j (rows) and mode m (columns)
    basis = np.cos(np.outer(phase, modes))
    weights = plan.eigenvalues / mode_factors
    matrix = (2.0 / n) * (basis * weights) @ basis.T
    return matrix / node_factors[np.newaxis, :]
