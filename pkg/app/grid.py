########################
# Grids and Fields     #
########################

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
import logging
from pathlib import Path
from typing import Callable, Tuple, Union

import numpy as np

from app.exceptions import (
    DimensionError,
    GridMismatchError,
    OutputError,
    SamplingError,
    ValidationError,
)

Scalar = Union[int, float]


class Family(str, Enum):
    """Grid family: cell centres (mid-point) or vertices (regular)."""

    MID_POINT = "mid"
    REGULAR = "regular"


@dataclass(frozen=True)
class Domain:
    """
    Rectangle [a, b] x [c, d].

    Raises:
        ValidationError: If the rectangle is empty.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not self.b > self.a:
            raise ValidationError(f"Domain needs b > a, got a={self.a}, b={self.b}")
        if not self.d > self.c:
            raise ValidationError(f"Domain needs d > c, got c={self.c}, d={self.d}")

    @property
    def area(self) -> float:
        return (self.b - self.a) * (self.d - self.c)


def _endpoint_factors(n: int) -> np.ndarray:
    """a_j of the regular grid: 2 at both ends, 1 inside (n intervals, n + 1 vertices)."""
    factors = np.ones(n + 1)
    factors[0] = 2.0
    factors[-1] = 2.0
    return factors


@dataclass(frozen=True)
class GridSpec:
    """
    A uniform grid of one family over a rectangular domain.

    The mid-point family has nx x ny cell-centre nodes with equal weights
    hx*hy. The regular family has (nx+1) x (ny+1) vertices with trapezoid
    weights hx*hy/(a_j b_k). Node coordinates and weights are computed once
    and cached. Two specs are equal when domain, family and resolution agree.
    """

    domain: Domain
    family: Family
    nx: int
    ny: int

    def __post_init__(self):
        for name in ('nx', 'ny'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")
        object.__setattr__(self, 'family', Family(self.family))

    @property
    def hx(self) -> float:
        return (self.domain.b - self.domain.a) / self.nx

    @property
    def hy(self) -> float:
        return (self.domain.d - self.domain.c) / self.ny

    @property
    def shape(self) -> Tuple[int, int]:
        if self.family is Family.MID_POINT:
            return (self.nx, self.ny)
        return (self.nx + 1, self.ny + 1)

    @cached_property
    def nodes_x(self) -> np.ndarray:
        if self.family is Family.MID_POINT:
            nodes = self.domain.a + (np.arange(self.nx) + 0.5) * self.hx
        else:
            nodes = self.domain.a + np.arange(self.nx + 1) * self.hx
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def nodes_y(self) -> np.ndarray:
        if self.family is Family.MID_POINT:
            nodes = self.domain.c + (np.arange(self.ny) + 0.5) * self.hy
        else:
            nodes = self.domain.c + np.arange(self.ny + 1) * self.hy
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def weights(self) -> np.ndarray:
        cell = self.hx * self.hy
        if self.family is Family.MID_POINT:
            weights = np.full(self.shape, cell)
        else:
            weights = cell / np.outer(_endpoint_factors(self.nx), _endpoint_factors(self.ny))
        weights.setflags(write=False)
        return weights

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays of shape `self.shape` (row index = x)."""
        return np.meshgrid(self.nodes_x, self.nodes_y, indexing='ij')


def make_grid(domain: Domain, family: Union[Family, str], nx: int, ny: int) -> GridSpec:
    """
    Build a grid of the given family and resolution.

    Args:
        domain (Domain): The rectangle to cover.
        family (Union[Family, str]): Mid-point or regular.
        nx (int): Number of intervals along x.
        ny (int): Number of intervals along y. Use 1 for one-dimensional problems.

    Returns:
        GridSpec: The grid.

    Raises:
        ValidationError: If a resolution is not a positive integer.
    """
    return GridSpec(domain=domain, family=Family(family), nx=nx, ny=ny)


@dataclass(frozen=True, eq=False)
class Field:
    """
    Real grid function sampled on a GridSpec.

    Fields are values: arithmetic returns new Fields and checks that both
    operands live on the same grid.
    """

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != self.grid.shape:
            raise DimensionError(
                f"Field shape {data.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError("Field contains non-finite values")
        object.__setattr__(self, 'data', data)

    @classmethod
    def zeros(cls, grid: GridSpec) -> 'Field':
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> 'Field':
        return cls(grid, np.full(grid.shape, float(value)))

    def like(self, data: np.ndarray) -> 'Field':
        """New Field on the same grid."""
        return Field(self.grid, data)

    def _other(self, other: Union['Field', Scalar]):
        if isinstance(other, Field):
            check_same_grid(self, other)
            return other.data
        return other

    def __add__(self, other):
        return self.like(self.data + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.like(self.data - self._other(other))

    def __rsub__(self, other):
        return self.like(self._other(other) - self.data)

    def __mul__(self, other):
        return self.like(self.data * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other: Scalar):
        return self.like(self.data / other)

    def __neg__(self):
        return self.like(-self.data)

    def __repr__(self) -> str:
        return (
            f"Field(family={self.grid.family.value}, shape={self.data.shape}, "
            f"max_abs={np.max(np.abs(self.data)):.3e})"
        )


@dataclass(frozen=True)
class State:
    """Phase-space point (u, v) of the semi-discrete Hamiltonian system."""

    u: Field
    v: Field

    def __post_init__(self):
        check_same_grid(self.u, self.v)

    @property
    def grid(self) -> GridSpec:
        return self.u.grid


def check_same_grid(*fields: Field) -> GridSpec:
    """
    Ensure all fields share one grid.

    Returns:
        GridSpec: The common grid.

    Raises:
        GridMismatchError: If any two grids differ.
    """
    grid = fields[0].grid
    for field in fields[1:]:
        if field.grid is not grid and field.grid != grid:
            raise GridMismatchError(
                f"Fields live on different grids: {grid} vs {field.grid}"
            )
    return grid


def inner(u: Field, w: Field) -> float:
    """
    Discrete inner product of two fields.

    On the mid-point grid this is hx*hy times the plain sum; on the regular
    grid every product carries the trapezoid weight hx*hy/(a_j b_k).

    Raises:
        GridMismatchError: If the fields live on different grids.
    """
    grid = check_same_grid(u, w)
    return float(np.sum(grid.weights * u.data * w.data))


def norm(u: Field) -> float:
    """Discrete L2 norm induced by `inner`."""
    return float(np.sqrt(inner(u, u)))


def sample(f: Callable, grid: GridSpec) -> Field:
    """
    Evaluate f(x, y) at every node of the grid.

    f is called once with coordinate arrays (numpy-vectorised); a scalar
    result is broadcast to the grid.

    Raises:
        SamplingError: If any sampled value is non-finite.
    """
    x, y = grid.mesh()
    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        values = np.asarray(f(x, y), dtype=float)
    values = np.array(np.broadcast_to(values, grid.shape), dtype=float)
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        index = tuple(int(i) for i in bad[0])
        raise SamplingError(
            f"Non-finite value at node {index} "
            f"(x={grid.nodes_x[index[0]]}, y={grid.nodes_y[index[1]]})",
            index=index,
        )
    return Field(grid, values)


########################
# Snapshot Format      #
########################

def snapshot_header(grid: GridSpec, t: float) -> str:
    dom = grid.domain
    return (
        f"t={t!r} family={grid.family.value} nx={grid.nx} ny={grid.ny} "
        f"a={dom.a!r} b={dom.b!r} c={dom.c!r} d={dom.d!r}"
    )


def save_field(field: Field, t: float, path: Union[str, Path], encoding: str = 'utf-8') -> None:
    """
    Write a field as a snapshot: one header comment, then one CSV row per x-index.

    Raises:
        OutputError: If the file cannot be written.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(
            path, field.data, fmt='%.17g', delimiter=',',
            header=snapshot_header(field.grid, t), comments='# ', encoding=encoding
        )
    except OSError as e:
        logging.error(f"Failed to write snapshot {path}: {e}")
        raise OutputError(f"Failed to write snapshot: {e}", path) from e


def load_field(path: Union[str, Path], encoding: str = 'utf-8') -> Tuple[Field, float]:
    """
    Read a snapshot written by `save_field`.

    Returns:
        Tuple[Field, float]: The field (on a reconstructed grid) and its time.

    Raises:
        OutputError: If the file cannot be read or its header is malformed.
    """
    path = Path(path)
    try:
        with open(path, encoding=encoding) as handle:
            header = handle.readline()
            data = np.loadtxt(handle, delimiter=',', ndmin=2)
    except OSError as e:
        raise OutputError(f"Failed to read snapshot: {e}", path) from e

    try:
        entries = dict(item.split('=', 1) for item in header.lstrip('#').split())
        domain = Domain(*(float(entries[k]) for k in ('a', 'b', 'c', 'd')))
        grid = make_grid(domain, Family(entries['family']), int(entries['nx']), int(entries['ny']))
        return Field(grid, data), float(entries['t'])
    except (KeyError, ValueError) as e:
        raise OutputError(f"Malformed snapshot header: {header.strip()}", path) from e
