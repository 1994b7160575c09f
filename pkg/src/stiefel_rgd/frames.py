"""Uniform grids, orbital frames, and the weighted L2 frame algebra.

A frame packs N orbitals as the columns of an (n_dof, N) array. All inner
products are lumped-mass L2 products: plain dot products scaled by the
cell weight h^d, so every frame identity is exact matrix algebra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

DIRICHLET = "dirichlet_zero"
PERIODIC = "periodic"


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on a box of edge length ``domain_length``.

    Dirichlet grids store interior points only (boundary values are
    implicitly zero); periodic grids store one point per cell.
    """

    dimension: int
    points_per_axis: int
    domain_length: float
    boundary: str = DIRICHLET

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ShapeError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.points_per_axis < 2:
            raise ShapeError("points_per_axis must be at least 2")
        if not self.domain_length > 0:
            raise ShapeError("domain_length must be positive")
        if self.boundary not in (DIRICHLET, PERIODIC):
            raise ShapeError(f"unknown boundary condition {self.boundary!r}")

    @property
    def spacing(self) -> float:
        n = self.points_per_axis
        if self.boundary == DIRICHLET:
            return self.domain_length / (n + 1)
        return self.domain_length / n

    @property
    def weight(self) -> float:
        """Quadrature weight of one grid point, h^d."""
        return self.spacing**self.dimension

    @property
    def n_dof(self) -> int:
        return self.points_per_axis**self.dimension

    def axis_coordinates(self) -> np.ndarray:
        n, h = self.points_per_axis, self.spacing
        if self.boundary == DIRICHLET:
            return h * np.arange(1, n + 1)
        return h * np.arange(n)

    def coordinates(self) -> np.ndarray:
        """All grid points as an (n_dof, dimension) array, row-major order."""
        axis = self.axis_coordinates()
        if self.dimension == 1:
            return axis[:, None]
        x, y = np.meshgrid(axis, axis, indexing="ij")
        return np.column_stack([x.ravel(), y.ravel()])


@dataclass(frozen=True, eq=False)
class Frame:
    """N orbitals on a grid, one per column of ``values``."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True, order="C")
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ShapeError(f"frame values must be 2-D, got ndim={values.ndim}")
        if values.shape[0] != self.grid.n_dof:
            raise ShapeError(
                f"frame has {values.shape[0]} rows but grid has {self.grid.n_dof} points"
            )
        if values.shape[1] < 1:
            raise ShapeError("frame needs at least one orbital")
        if not np.isfinite(values).all():
            raise ValueError("frame contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_orbitals(self) -> int:
        return self.values.shape[1]

    def _check_same_space(self, other: "Frame"):
        if self.grid != other.grid or self.n_orbitals != other.n_orbitals:
            raise ShapeError("frames live on different grids or have different N")

    def __add__(self, other: "Frame") -> "Frame":
        self._check_same_space(other)
        return Frame(self.values + other.values, self.grid)

    def __sub__(self, other: "Frame") -> "Frame":
        self._check_same_space(other)
        return Frame(self.values - other.values, self.grid)

    def __mul__(self, scalar: float) -> "Frame":
        return Frame(self.values * float(scalar), self.grid)

    __rmul__ = __mul__

    def __neg__(self) -> "Frame":
        return Frame(-self.values, self.grid)


def outer_product(v: Frame, w: Frame) -> np.ndarray:
    """Matrix of all pairwise weighted L2 products, entry (i,j) = (v_i, w_j)."""
    v._check_same_space(w)
    return v.grid.weight * (v.values.T @ w.values)


def inner_h(v: Frame, w: Frame) -> float:
    """Frame inner product: trace of the outer product."""
    v._check_same_space(w)
    return v.grid.weight * float(np.vdot(v.values, w.values))


def norm_h(v: Frame) -> float:
    return float(np.sqrt(max(inner_h(v, v), 0.0)))


def density(phi: Frame) -> np.ndarray:
    """Pointwise density, the sum of squared orbital values."""
    return np.einsum("ij,ij->i", phi.values, phi.values)


def multiply_right(v: Frame, s: np.ndarray) -> Frame:
    """Mix orbitals by a matrix acting from the right."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != v.n_orbitals:
        raise ShapeError(
            f"matrix of shape {s.shape} cannot act on a frame with N={v.n_orbitals}"
        )
    return Frame(v.values @ s, v.grid)


def zero_frame(grid: GridSpec, n_orbitals: int) -> Frame:
    return Frame(np.zeros((grid.n_dof, n_orbitals)), grid)


def random_frame(grid: GridSpec, n_orbitals: int, rng: np.random.Generator) -> Frame:
    """Gaussian frame; not orthonormal."""
    return Frame(rng.standard_normal((grid.n_dof, n_orbitals)), grid)
