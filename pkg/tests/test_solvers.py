"""Columnwise CG and dense solves, preconditioners, and their agreement."""

import numpy as np
import pytest
import scipy.sparse as sp

from stiefel_rgd import (
    ConvergenceError,
    DiscreteOperatorA,
    Frame,
    GridSpec,
    SolveConfig,
    apply_preconditioner,
    norm_h,
    random_frame,
    solve,
    zero_frame,
)
from stiefel_rgd.errors import OperatorNotSPDError
from stiefel_rgd.geometry import retract_qr_mgs

from conftest import make_model


@pytest.fixture
def rng():
    return np.random.default_rng(21)


@pytest.fixture
def model():
    return make_model(n=64, length=1.0, omega=8.0, kappa=20.0, n_orbitals=2)


@pytest.fixture
def op(model, rng):
    anchor, _ = retract_qr_mgs(random_frame(model.grid, 2, rng))
    return DiscreteOperatorA.at(model, anchor)


def identity_operator(model):
    """Operator stub whose matrix is the identity (kinetic part removed,
    unit shift): CG must finish in a single step."""
    nd = model.grid.n_dof
    return DiscreteOperatorA(
        model=model, rho=np.zeros(nd), matrix=sp.identity(nd, format="csr")
    )


class TestSolveConfig:
    def test_defaults(self):
        config = SolveConfig()
        assert config.rel_tol == 1e-8
        assert config.max_iters == 500
        assert config.fixed_iters is None

    def test_validation(self):
        with pytest.raises(ValueError):
            SolveConfig(rel_tol=2.0)
        with pytest.raises(ValueError):
            SolveConfig(fixed_iters=0)
        with pytest.raises(ValueError):
            SolveConfig(method="gmres")
        with pytest.raises(ValueError):
            SolveConfig(preconditioner="multigrid")


class TestSolve:
    def test_zero_rhs(self, op, model):
        x, report = solve(op, zero_frame(model.grid, 2), SolveConfig())
        assert norm_h(x) == 0.0
        assert report.iterations_per_column == [0, 0]

    def test_identity_operator_single_iteration(self, model, rng):
        op = identity_operator(model)
        b = random_frame(model.grid, 2, rng)
        x, report = solve(op, b, SolveConfig())
        assert norm_h(x - b) <= 1e-14 * norm_h(b)
        assert report.iterations_per_column == [1, 1]

    def test_cg_matches_dense(self, op, model, rng):
        b = random_frame(model.grid, 2, rng)
        x_cg, _ = solve(op, b, SolveConfig(rel_tol=1e-10, max_iters=2000))
        x_dd, _ = solve(op, b, SolveConfig(method="direct_dense"))
        assert norm_h(x_cg - x_dd) <= 1e-7 * norm_h(x_dd)

    def test_residual_bound_remeasured(self, op, model, rng):
        b = random_frame(model.grid, 2, rng)
        config = SolveConfig(rel_tol=1e-8, max_iters=2000)
        x, report = solve(op, b, config)
        for j in range(2):
            col_b = b.values[:, j]
            res = np.linalg.norm(col_b - op.matrix @ x.values[:, j])
            assert res <= config.rel_tol * np.linalg.norm(col_b)
            assert report.final_relative_residuals[j] <= config.rel_tol

    def test_preconditioned_solutions_agree(self, op, model, rng):
        b = random_frame(model.grid, 2, rng)
        config = SolveConfig(rel_tol=1e-9, max_iters=2000)
        baseline, _ = solve(op, b, config)
        for kind in ("diagonal", "kinetic_shift"):
            x, _ = solve(
                op, b, SolveConfig(rel_tol=1e-9, max_iters=2000, preconditioner=kind)
            )
            assert norm_h(x - baseline) <= 10 * config.rel_tol * norm_h(baseline)

    def test_warm_start_honored(self, op, model, rng):
        b = random_frame(model.grid, 2, rng)
        exact, _ = solve(op, b, SolveConfig(method="direct_dense"))
        _, cold = solve(op, b, SolveConfig(rel_tol=1e-10, max_iters=2000))
        _, warm = solve(
            op, b, SolveConfig(rel_tol=1e-10, max_iters=2000), warm_start=exact
        )
        assert warm.total_iterations < cold.total_iterations

    def test_fixed_iteration_mode(self, op, model, rng):
        b = random_frame(model.grid, 2, rng)
        _, report = solve(op, b, SolveConfig(fixed_iters=4))
        assert report.iterations_per_column == [4, 4]

    def test_nonconvergence_carries_report(self, op, model, rng):
        b = random_frame(model.grid, 2, rng)
        with pytest.raises(ConvergenceError) as info:
            solve(op, b, SolveConfig(rel_tol=1e-12, max_iters=3))
        assert info.value.report is not None
        assert info.value.report.iterations_per_column[0] == 3

    def test_indefinite_operator_detected(self, model, rng):
        nd = model.grid.n_dof
        diag = np.ones(nd)
        diag[: nd // 2] = -1.0
        bad = DiscreteOperatorA(
            model=model, rho=np.zeros(nd), matrix=sp.diags(diag, format="csr")
        )
        b = random_frame(model.grid, 1, rng)
        with pytest.raises(OperatorNotSPDError):
            solve(bad, b, SolveConfig())

    def test_dense_limit_enforced(self, rng):
        model = make_model(n=96, length=1.0, omega=1.0, kappa=0.0, n_orbitals=1,
                           dimension=2)
        anchor = random_frame(model.grid, 1, rng)
        op = DiscreteOperatorA.at(model, anchor)
        with pytest.raises(Exception, match="dense"):
            solve(op, anchor, SolveConfig(method="direct_dense"))


class TestPreconditioners:
    def test_none_is_identity(self, op, model, rng):
        r = random_frame(model.grid, 2, rng)
        assert apply_preconditioner("none", op, r) is r

    def test_diagonal_inverts_diagonal_operator(self, model, rng):
        op = identity_operator(model)
        scaled = DiscreteOperatorA(
            model=model,
            rho=np.zeros(model.grid.n_dof),
            matrix=(4.0 * sp.identity(model.grid.n_dof)).tocsr(),
        )
        r = random_frame(model.grid, 1, rng)
        out = apply_preconditioner("diagonal", scaled, r)
        assert np.allclose(out.values, r.values / 4.0)
        assert norm_h(apply_preconditioner("diagonal", op, r) - r) == 0.0

    def test_kinetic_shift_reduces_iterations(self, rng):
        model = make_model(n=128, length=1.0, omega=10.0, kappa=100.0, n_orbitals=1)
        anchor, _ = retract_qr_mgs(random_frame(model.grid, 1, rng))
        op = DiscreteOperatorA.at(model, anchor)
        b = anchor
        _, plain = solve(op, b, SolveConfig(rel_tol=1e-8, max_iters=5000))
        _, shifted = solve(
            op, b,
            SolveConfig(rel_tol=1e-8, max_iters=5000, preconditioner="kinetic_shift"),
        )
        assert shifted.total_iterations < plain.total_iterations

    def test_solution_frames_reconstruct_rhs(self, op, model, rng):
        b = random_frame(model.grid, 2, rng)
        x, _ = solve(
            op, b, SolveConfig(rel_tol=1e-10, max_iters=2000, preconditioner="diagonal")
        )
        recon = Frame(op.matrix @ x.values, model.grid)
        assert norm_h(recon - b) <= 1e-8 * norm_h(b)
