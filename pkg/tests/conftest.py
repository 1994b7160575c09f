"""Shared fixtures: reference problems, cached runs, and independent oracles.

The oracle helpers here deliberately avoid the library code paths they are
used to check (stacked saddle-point solves, classical Gram-Schmidt, dense
eigensolves, double-loop quadrature).
"""

import numpy as np
import pytest

from stiefel_rgd import (
    EnergyModel,
    Frame,
    GridSpec,
    SolveConfig,
    initial_frame,
    potential_harmonic,
    rgd_fixed_step,
    rgd_line_search,
)
from stiefel_rgd.models import DiscreteOperatorA
from stiefel_rgd.solvers import dense_inverse_applier

# Frozen reference problems. The unit-box GPE with a centered harmonic trap
# and strong repulsion, and its three-orbital density-coupled companion.
GPE_SPEC = dict(n=128, length=1.0, omega=10.0, kappa=100.0, n_orbitals=1, seed=7)
COUPLED_SPEC = dict(n=128, length=1.0, omega=10.0, kappa=10.0, n_orbitals=3, seed=7)

RUN_TOL = 1e-6
FIXED_TAU = 0.1
INEXACT_ITERS = 3


def make_model(n, length, omega, kappa, n_orbitals, seed=None, shift=0.0, dimension=1):
    grid = GridSpec(dimension, n, length)
    return EnergyModel(
        grid, potential_harmonic(grid, omega), kappa=kappa, shift=shift,
        n_orbitals=n_orbitals,
    )


def reference_solver_config():
    return SolveConfig(rel_tol=1e-8, max_iters=500, preconditioner="kinetic_shift")


def dense_a_solve(model, phi):
    """Exact columnwise inverse of the operator anchored at phi."""
    return dense_inverse_applier(DiscreteOperatorA.at(model, phi))


def random_tangent(model, phi, rng, normalized=False):
    """Tangent vector built from the projection of a Gaussian frame,
    using the exact solver."""
    from stiefel_rgd import norm_h, project_tangent, random_frame

    eta = project_tangent(
        phi, random_frame(phi.grid, phi.n_orbitals, rng), dense_a_solve(model, phi)
    )
    if normalized:
        eta = (1.0 / norm_h(eta)) * eta
    return eta


def symmetric_pair_matrices(n_orbitals):
    """Normalized symmetric basis matrices, one per index pair (i <= j)."""
    pairs = [(i, j) for i in range(n_orbitals) for j in range(i, n_orbitals)]
    mats = []
    for i, j in pairs:
        s = np.zeros((n_orbitals, n_orbitals))
        if i == j:
            s[i, i] = 1.0
        else:
            s[i, j] = s[j, i] = 1.0 / np.sqrt(2.0)
        mats.append(s)
    return pairs, mats


def saddle_normal_basis(model, phi):
    """Oracle: the metric-normal basis frames from stacked saddle solves.

    For every index pair (k, l) solves the constrained system whose
    solution is biorthogonal to the manifold-normal basis frames, using one
    dense block factorization. Returns (pairs, basis_frames, psi_frames).
    """
    grid = model.grid
    n_orb = phi.n_orbitals
    nd, w = grid.n_dof, grid.weight
    op = DiscreteOperatorA.at(model, phi)
    a = op.matrix.toarray()
    pairs, mats = symmetric_pair_matrices(n_orb)
    basis = [Frame(phi.values @ s, grid) for s in mats]
    b = np.column_stack([f.values.reshape(-1, order="F") for f in basis])
    m = len(pairs)
    system = np.block(
        [
            [np.kron(np.eye(n_orb), a), b],
            [w * b.T, np.zeros((m, m))],
        ]
    )
    lu = np.linalg.inv(system)  # small; reused for all right-hand sides
    psis = []
    for idx in range(m):
        rhs = np.zeros(n_orb * nd + m)
        rhs[n_orb * nd + idx] = 1.0
        sol = lu @ rhs
        psis.append(Frame(sol[: n_orb * nd].reshape(nd, n_orb, order="F"), grid))
    return pairs, basis, psis


def saddle_projection_oracle(model, phi, v):
    """Oracle projection assembled from the saddle-basis expansion."""
    _, basis, psis = saddle_normal_basis(model, phi)
    w = model.grid.weight
    values = v.values.copy()
    for b, psi in zip(basis, psis):
        coeff = w * float(np.vdot(b.values, v.values))
        values = values - coeff * psi.values
    return Frame(values, model.grid)


def classical_gram_schmidt(v):
    """Oracle: textbook Gram-Schmidt in the weighted product (not modified)."""
    w = v.grid.weight
    work = np.array(v.values)
    q = np.empty_like(work)
    for j in range(v.n_orbitals):
        col = work[:, j].copy()
        for i in range(j):
            col -= w * float(np.dot(work[:, j], q[:, i])) * q[:, i]
        q[:, j] = col / (np.sqrt(w) * np.linalg.norm(col))
    return Frame(q, v.grid)


def dense_lowest_eigenpairs(model, count):
    """Oracle: dense symmetric eigensolve of the linear operator."""
    from stiefel_rgd.models import linear_part_matrix

    eigenvalues, vectors = np.linalg.eigh(linear_part_matrix(model).toarray())
    w = model.grid.weight
    modes = vectors[:, :count] / np.sqrt(w * np.sum(vectors[:, :count] ** 2, axis=0))
    return eigenvalues[:count], Frame(modes, model.grid)


@pytest.fixture(scope="session")
def gpe_model():
    return make_model(**{k: v for k, v in GPE_SPEC.items() if k != "seed"})


@pytest.fixture(scope="session")
def coupled_model():
    return make_model(**{k: v for k, v in COUPLED_SPEC.items() if k != "seed"})


@pytest.fixture(scope="session")
def gpe_start(gpe_model):
    return initial_frame(gpe_model.grid, gpe_model.n_orbitals, GPE_SPEC["seed"])


@pytest.fixture(scope="session")
def coupled_start(coupled_model):
    return initial_frame(coupled_model.grid, coupled_model.n_orbitals, COUPLED_SPEC["seed"])


def _all_method_runs(model, phi0):
    config = reference_solver_config()
    runs = {
        "rgd_fixed": rgd_fixed_step(
            model, phi0, FIXED_TAU, tol=RUN_TOL, max_iter=5000,
            solver_config=config, log_frames=True,
        ),
        "rgd_ls": rgd_line_search(
            model, phi0, tol=RUN_TOL, max_iter=2000,
            solver_config=config, log_frames=True,
        ),
        "rgd_ls_inexact": rgd_line_search(
            model, phi0, direction_kind="inexact_grad", fixed_iters=INEXACT_ITERS,
            tol=RUN_TOL, max_iter=2000, solver_config=config, log_frames=True,
        ),
        "dcm": rgd_line_search(
            model, phi0, direction_kind="dcm", fixed_iters=INEXACT_ITERS,
            tol=RUN_TOL, max_iter=2000, solver_config=config, log_frames=True,
        ),
    }
    return runs


@pytest.fixture(scope="session")
def gpe_runs(gpe_model, gpe_start):
    return _all_method_runs(gpe_model, gpe_start)


@pytest.fixture(scope="session")
def coupled_runs(coupled_model, coupled_start):
    return _all_method_runs(coupled_model, coupled_start)
