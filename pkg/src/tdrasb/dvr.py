"""Sine-DVR grid, one-body Hamiltonian, interaction matrix elements and mean fields.

Orbitals are stored as rows of an ``(M, n_points)`` complex array holding grid
values; inner products use the uniform quadrature weight ``dx``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import DegenerateBasisError


@dataclass(frozen=True)
class Grid:
    """Uniform interior grid of a hard-wall box with its sine-DVR derivative matrix."""

    x_min: float
    x_max: float
    n_points: int
    points: np.ndarray = field(repr=False, compare=False)
    dx: float = field(compare=False)
    second_derivative: np.ndarray = field(repr=False, compare=False)

    @property
    def kinetic(self) -> np.ndarray:
        """``-1/2 d^2/dx^2`` on the grid."""
        return -0.5 * self.second_derivative

    @property
    def length(self) -> float:
        return self.x_max - self.x_min


def build_grid(x_min: float = -8.0, x_max: float = 8.0, n_points: int = 101) -> Grid:
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or x_max <= x_min:
        raise ValueError(f"invalid box [{x_min}, {x_max}]")
    if int(n_points) != n_points or n_points < 2:
        raise ValueError(f"n_points must be an integer >= 2, got {n_points}")
    n = int(n_points)
    length = x_max - x_min
    dx = length / (n + 1)
    alpha = np.arange(1, n + 1)
    points = x_min + alpha * dx
    # sine basis sin(j pi (x - x_min) / L) is diagonal in d^2/dx^2 with eigenvalue -(j pi / L)^2
    u = np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(alpha, alpha) / (n + 1))
    k2 = (np.pi * alpha / length) ** 2
    d2 = -(u * k2) @ u.T
    d2 = 0.5 * (d2 + d2.T)
    for arr in (points, d2):
        arr.setflags(write=False)
    return Grid(float(x_min), float(x_max), n, points, dx, d2)


@dataclass(frozen=True)
class Trap:
    """Harmonic confinement ``1/2 omega^2 x^2``."""

    omega: float = 1.0

    def potential(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * self.omega ** 2 * np.asarray(x) ** 2


@dataclass(frozen=True)
class Interaction:
    """Pair interaction: ``contact`` is ``g delta(x - x')``, ``harmonic`` is ``g (x - x')^2``."""

    kind: Literal["contact", "harmonic"] = "contact"
    strength: float = 0.0

    def __post_init__(self):
        if self.kind not in ("contact", "harmonic"):
            raise ValueError(f"unknown interaction kind {self.kind!r}")
        if not np.isfinite(self.strength):
            raise ValueError("interaction strength must be finite")


def grid_hamiltonian(grid: Grid, trap: Trap) -> np.ndarray:
    """Single-particle Hamiltonian as an ``n_points x n_points`` matrix."""
    return grid.kinetic + np.diag(trap.potential(grid.points))


def overlap(orbitals: np.ndarray, grid: Grid) -> np.ndarray:
    phi = np.asarray(orbitals)
    return grid.dx * (phi.conj() @ phi.T)


def one_body_matrix(orbitals: np.ndarray, grid: Grid, trap: Trap, h_grid: np.ndarray | None = None) -> np.ndarray:
    """``h[p, q] = <phi_p| h |phi_q>``."""
    phi = np.asarray(orbitals)
    if h_grid is None:
        h_grid = grid_hamiltonian(grid, trap)
    h = grid.dx * (phi.conj() @ (h_grid @ phi.T))
    return 0.5 * (h + h.conj().T)


def _moments(phi: np.ndarray, grid: Grid):
    x = grid.points
    s = grid.dx * (phi.conj() @ phi.T)
    x1 = grid.dx * ((phi.conj() * x) @ phi.T)
    x2 = grid.dx * ((phi.conj() * x ** 2) @ phi.T)
    return s, x1, x2


def two_body_tensor(orbitals: np.ndarray, grid: Grid, interaction: Interaction) -> np.ndarray:
    """``v[p, r, q, s] = <phi_p phi_r| W |phi_q phi_s>``."""
    phi = np.asarray(orbitals, dtype=complex)
    g = interaction.strength
    m = phi.shape[0]
    if g == 0.0:
        return np.zeros((m, m, m, m), dtype=complex)
    if interaction.kind == "contact":
        pc = phi.conj()
        return g * grid.dx * np.einsum("pa,ra,qa,sa->prqs", pc, pc, phi, phi, optimize=True)
    s, x1, x2 = _moments(phi, grid)
    v = (np.einsum("pq,rs->prqs", x2, s)
         - 2.0 * np.einsum("pq,rs->prqs", x1, x1)
         + np.einsum("pq,rs->prqs", s, x2))
    return g * v


def mean_field_operators(orbitals: np.ndarray, grid: Grid, interaction: Interaction) -> np.ndarray:
    """Grid values ``W[k, l, a]`` of the multiplication operator ``int phi_k^*(x') W(x, x') phi_l(x') dx'``."""
    phi = np.asarray(orbitals, dtype=complex)
    g = interaction.strength
    m, n = phi.shape
    if g == 0.0:
        return np.zeros((m, m, n), dtype=complex)
    if interaction.kind == "contact":
        return g * phi.conj()[:, None, :] * phi[None, :, :]
    s, x1, x2 = _moments(phi, grid)
    x = grid.points
    return g * (s[:, :, None] * x ** 2 - 2.0 * x1[:, :, None] * x + x2[:, :, None])


def orthonormalize(orbitals: np.ndarray, grid: Grid, tol: float = 1e-12) -> np.ndarray:
    """Modified Gram-Schmidt with quadrature weight ``dx``, two passes for stability."""
    phi = np.array(orbitals, dtype=complex, copy=True)
    if phi.ndim != 2:
        raise ValueError("orbitals must be an (M, n_points) array")
    w = grid.dx
    for i in range(phi.shape[0]):
        for _ in range(2):
            for j in range(i):
                phi[i] -= w * np.vdot(phi[j], phi[i]) * phi[j]
        norm = np.sqrt(w * np.vdot(phi[i], phi[i]).real)
        if norm < tol:
            raise DegenerateBasisError(f"orbital {i} is linearly dependent on the preceding ones")
        phi[i] /= norm
    return phi


def ho_orbitals(grid: Grid, trap: Trap, m: int) -> np.ndarray:
    """Lowest ``m`` eigenfunctions of the grid Hamiltonian, real with a positive first lobe."""
    if not 1 <= m <= grid.n_points:
        raise ValueError(f"need 1 <= m <= {grid.n_points}, got {m}")
    _, vec = np.linalg.eigh(grid_hamiltonian(grid, trap))
    phi = vec[:, :m].T / np.sqrt(grid.dx)
    for row in phi:
        k = np.argmax(np.abs(row) > 1e-3 * np.abs(row).max())
        if row[k] < 0:
            row *= -1
    return phi.astype(complex)


@dataclass(frozen=True)
class Model:
    """Grid, trap and pair interaction defining the many-body Hamiltonian."""

    grid: Grid
    trap: Trap = Trap()
    interaction: Interaction = Interaction()

    @cached_property
    def h_grid(self) -> np.ndarray:
        return grid_hamiltonian(self.grid, self.trap)

    def with_interaction(self, interaction: Interaction) -> "Model":
        return Model(self.grid, self.trap, interaction)

    def one_body(self, orbitals: np.ndarray) -> np.ndarray:
        return one_body_matrix(orbitals, self.grid, self.trap, self.h_grid)

    def two_body(self, orbitals: np.ndarray) -> np.ndarray:
        return two_body_tensor(orbitals, self.grid, self.interaction)

    def mean_fields(self, orbitals: np.ndarray) -> np.ndarray:
        return mean_field_operators(orbitals, self.grid, self.interaction)
