"""Piecewise-linear finite element layer on a uniform 1D interval.

The solver state lives in H^1(0, L), discretized with hat functions on a
uniform grid.  Two representations coexist and must not be mixed:

* a *field* is the nodal coefficient vector of an H^1 function,
* a *dual field* is an assembled functional (load vector); pairing a
  dual field with a field is the plain dot product of the two vectors.

The Riesz map between the representations is the H^1 Gram matrix
(mass plus stiffness).  It is symmetric positive definite; this module
builds it once per mesh and keeps a Cholesky factorization for solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "Field",
    "DualField",
    "Mesh",
    "build_mesh",
    "h1_inner",
    "h1_norm",
    "l2_inner",
    "l2_norm",
    "riesz_apply",
    "riesz_solve",
    "dual_pair",
    "dual_norm",
    "cone_project",
    "interpolate",
    "assemble_dual",
]

# Nodal coefficients of an H^1 function.
Field = np.ndarray
# Assembled functional; entry i is the action on hat function i.
DualField = np.ndarray


@dataclass(eq=False)
class Mesh:
    """Uniform P1 discretization of the interval [0, length]."""

    n_nodes: int
    length: float
    nodes: np.ndarray
    mass: np.ndarray
    stiffness: np.ndarray
    riesz: np.ndarray
    lumped_mass: np.ndarray
    _factor: tuple = field(repr=False, default=None)
    _inverse: np.ndarray | None = field(repr=False, default=None)

    @property
    def h(self) -> float:
        """Element size."""
        return self.length / (self.n_nodes - 1)

    def riesz_inverse(self) -> np.ndarray:
        """Dense inverse of the Riesz matrix (computed once, then cached).

        Used as the Hessian of dual-side projection problems; meshes in
        this package are small enough that the dense inverse is cheap.
        """
        if self._inverse is None:
            inv = cho_solve(self._factor, np.eye(self.n_nodes))
            self._inverse = 0.5 * (inv + inv.T)
        return self._inverse


def build_mesh(n_nodes: int, length: float = 1.0) -> Mesh:
    """Assemble mass, stiffness and Riesz matrices for a uniform grid.

    Parameters
    ----------
    n_nodes : int
        Number of grid nodes, at least 2.
    length : float
        Length of the interval, positive.
    """
    if not isinstance(n_nodes, (int, np.integer)) or isinstance(n_nodes, bool):
        raise ValueError(f"n_nodes must be an integer, got {n_nodes!r}")
    if n_nodes < 2:
        raise ValueError(f"n_nodes must be at least 2, got {n_nodes}")
    if not (np.isfinite(length) and length > 0):
        raise ValueError(f"length must be a positive finite number, got {length!r}")

    n = int(n_nodes)
    length = float(length)
    h = length / (n - 1)
    nodes = np.linspace(0.0, length, n)

    d_mass = np.full(n, 2.0 * h / 3.0)
    d_mass[[0, -1]] = h / 3.0
    o_mass = np.full(n - 1, h / 6.0)
    mass = np.diag(d_mass) + np.diag(o_mass, 1) + np.diag(o_mass, -1)

    d_stiff = np.full(n, 2.0 / h)
    d_stiff[[0, -1]] = 1.0 / h
    o_stiff = np.full(n - 1, -1.0 / h)
    stiffness = np.diag(d_stiff) + np.diag(o_stiff, 1) + np.diag(o_stiff, -1)

    riesz = mass + stiffness
    factor = cho_factor(riesz)
    return Mesh(
        n_nodes=n,
        length=length,
        nodes=nodes,
        mass=mass,
        stiffness=stiffness,
        riesz=riesz,
        lumped_mass=mass.sum(axis=1),
        _factor=factor,
    )


def h1_inner(mesh: Mesh, u: Field, v: Field) -> float:
    """H^1 inner product of two fields."""
    return float(u @ (mesh.riesz @ v))


def h1_norm(mesh: Mesh, u: Field) -> float:
    return math.sqrt(max(h1_inner(mesh, u, u), 0.0))


def l2_inner(mesh: Mesh, u: Field, v: Field) -> float:
    """L^2 inner product of two fields (consistent mass matrix)."""
    return float(u @ (mesh.mass @ v))


def l2_norm(mesh: Mesh, u: Field) -> float:
    return math.sqrt(max(l2_inner(mesh, u, u), 0.0))


def riesz_apply(mesh: Mesh, u: Field) -> DualField:
    """Map a field to the dual field representing its H^1 inner product."""
    return mesh.riesz @ u


def riesz_solve(mesh: Mesh, w: DualField) -> Field:
    """Inverse Riesz map: recover the field representing a dual field."""
    return cho_solve(mesh._factor, np.asarray(w, dtype=float))


def dual_pair(w: DualField, v: Field) -> float:
    """Duality pairing of an assembled functional with a field."""
    return float(np.dot(w, v))


def dual_norm(mesh: Mesh, w: DualField) -> float:
    """Dual H^1 norm of an assembled functional."""
    return math.sqrt(max(dual_pair(w, riesz_solve(mesh, w)), 0.0))


def cone_project(v: Field) -> Field:
    """Nodal projection onto the cone of nonnegative fields."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def interpolate(mesh: Mesh, fn: Callable[[np.ndarray], np.ndarray]) -> Field:
    """Nodal interpolation of a function of the space variable."""
    vals = np.asarray(fn(mesh.nodes), dtype=float)
    return np.broadcast_to(vals, (mesh.n_nodes,)).copy()


def assemble_dual(mesh: Mesh, density: Field) -> DualField:
    """Assemble the load vector of an L^2 density given by nodal values."""
    return mesh.mass @ np.asarray(density, dtype=float)
