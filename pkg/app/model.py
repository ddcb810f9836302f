########################
# Sine-Gordon Model    #
########################

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from app.grid import Domain, Field, GridSpec, State, check_same_grid, inner, sample
from app.spectral import laplacian

SpatialFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
SpaceTimeFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


class GChoice(str, Enum):
    """Supplementary function multiplying beta in the relaxed system."""

    G1 = "g1"  # phi sin u
    G2 = "g2"  # Laplacian u - phi sin u


@dataclass(frozen=True)
class SGProblem:
    """
    Sine-Gordon problem u_tt - Laplacian u + phi sin u = 0 with Neumann boundaries.

    Attributes:
        domain (Domain): The rectangle.
        phi (SpatialFunction): Josephson current density.
        init_u (SpatialFunction): Initial waveform.
        init_v (SpatialFunction): Initial velocity.
        exact (Optional[SpaceTimeFunction]): Exact solution u(x, y, t) when known.
        name (str): Label used in logs and file names.
    """

    domain: Domain
    phi: SpatialFunction
    init_u: SpatialFunction
    init_v: SpatialFunction
    exact: Optional[SpaceTimeFunction] = None
    name: str = "problem"

    def sample_phi(self, grid: GridSpec) -> Field:
        return sample(self.phi, grid)

    def initial_state(self, grid: GridSpec) -> State:
        return State(sample(self.init_u, grid), sample(self.init_v, grid))


def energy(state: State, phi: Field) -> float:
    """
    Discrete energy 1/2 |v|^2 - 1/2 (u, Laplacian u) + (phi, 1 - cos u).

    Norms and inner products are those of the state's grid, so the same
    formula covers both families.

    Raises:
        GridMismatchError: If phi lives on another grid.
    """
    u, v = state.u, state.v
    grid = check_same_grid(u, phi)
    potential = float(np.sum(grid.weights * phi.data * (1.0 - np.cos(u.data))))
    return 0.5 * inner(v, v) - 0.5 * inner(u, laplacian(u)) + potential


def energy_gradient(state: State, phi: Field) -> Tuple[Field, Field]:
    """
    Variational derivative of the discrete energy: (-Laplacian u + phi sin u, v).

    The pair is the gradient with respect to the grid inner product, so the
    directional derivative along (p, q) is inner(grad_u, p) + inner(grad_v, q).
    """
    u, v = state.u, state.v
    check_same_grid(u, phi)
    grad_u = u.like(-laplacian(u).data + phi.data * np.sin(u.data))
    return grad_u, v


def rhs(state: State, phi: Field) -> Tuple[Field, Field]:
    """Right-hand side of the semi-discrete system: (v, Laplacian u - phi sin u)."""
    u, v = state.u, state.v
    check_same_grid(u, phi)
    return v, u.like(laplacian(u).data - phi.data * np.sin(u.data))


def supplementary_g(state: State, phi: Field, choice: GChoice = GChoice.G1) -> Field:
    """
    Supplementary function g[u, v].

    Returns:
        Field: phi sin u for G1, Laplacian u - phi sin u for G2.
    """
    u = state.u
    check_same_grid(u, phi)
    nonlinear = phi.data * np.sin(u.data)
    if GChoice(choice) is GChoice.G1:
        return u.like(nonlinear)
    return u.like(laplacian(u).data - nonlinear)


class EnergyLine:
    """
    The discrete energy restricted to the line s -> base + s * direction.

    Kinetic and gradient parts are quadratic in s and are precomputed, so
    every evaluation costs one pass of cos/sin over the grid. `slope` is the
    directional derivative inner(grad H, direction) at the point on the line.
    """

    def __init__(self, base: State, direction: Tuple[Field, Field], phi: Field):
        du, dv = direction
        grid = check_same_grid(base.u, base.v, du, dv, phi)
        lap_u = laplacian(base.u)
        lap_du = laplacian(du)
        self._constant = 0.5 * inner(base.v, base.v) - 0.5 * inner(base.u, lap_u)
        self._linear = inner(base.v, dv) - 0.5 * (inner(base.u, lap_du) + inner(du, lap_u))
        self._quadratic = 0.5 * inner(dv, dv) - 0.5 * inner(du, lap_du)
        self._weighted_phi = grid.weights * phi.data
        self._u = base.u.data
        self._du = du.data

    def value(self, s: float) -> float:
        u = self._u + s * self._du
        potential = float(np.sum(self._weighted_phi * (1.0 - np.cos(u))))
        return self._constant + s * (self._linear + s * self._quadratic) + potential

    def slope(self, s: float) -> float:
        u = self._u + s * self._du
        potential = float(np.sum(self._weighted_phi * np.sin(u) * self._du))
        return self._linear + 2.0 * s * self._quadratic + potential
