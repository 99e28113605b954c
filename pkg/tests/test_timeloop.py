import numpy as np
import pytest
import scipy.sparse as sp

from stokesmpe import timeloop
from stokesmpe.assembly import Discretization
from stokesmpe.estimators import error_norms
from stokesmpe.mesh import build_two_square_mesh
from stokesmpe.mms import ExactSolution
from stokesmpe.timeloop import (DirectSolver, SingularMatrixError, TimeGrid, run_time_loop,
                                sparse_solve)


def test_time_grid():
    g = TimeGrid(5e-7, 1e-7)
    assert g.n_steps == 5
    np.testing.assert_allclose(g.nodes, np.arange(6) * 1e-7)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0.3)
    with pytest.raises(ValueError):
        TimeGrid(1.0, -0.1)


def test_identity_solve():
    b = np.arange(5.0)
    x, res = sparse_solve(sp.identity(5, format="csr"), b)
    assert np.array_equal(x, b)
    assert res == 0.0


def test_diagonally_dominant_solve():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(50, 50))
    A += np.diag(np.abs(A).sum(axis=1) + 1.0)
    b = rng.normal(size=50)
    x, res = sparse_solve(sp.csr_matrix(A), b)
    assert res <= 1e-10
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-10


def test_singular_matrix():
    with pytest.raises(SingularMatrixError):
        sparse_solve(sp.csr_matrix((4, 4)), np.ones(4))
    with pytest.raises(ValueError):
        DirectSolver(sp.csr_matrix((3, 4)))


@pytest.fixture(scope="module")
def mms_run():
    ex = ExactSolution()
    disc = Discretization(build_two_square_mesh(4), ex.params)
    traj = run_time_loop(disc, TimeGrid(5e-7, 1e-7), ex.sources(), ex.fields, ex.fields)
    return ex, disc, traj


def test_step_count(mms_run):
    _, _, traj = mms_run
    assert len(traj.states) == 6
    assert len(traj.residuals) == 5
    assert max(traj.residuals) <= 1e-10
    assert max(traj.galerkin) <= 1e-9


def test_zero_data(disc2):
    traj = run_time_loop(disc2, TimeGrid(3.0, 1.0))
    assert np.all(traj.states == 0.0)


def test_determinism(mms_run):
    ex, disc, traj = mms_run
    again = run_time_loop(disc, traj.grid, ex.sources(), ex.fields, ex.fields)
    assert np.array_equal(traj.states, again.states)


def test_discrete_divergence_free(mms_run):
    _, disc, traj = mms_run
    B = disc.forms["b_f"]
    for n in range(1, len(traj.states)):
        u = traj.field("u", n)
        r = B.T @ u
        assert np.abs(r).max() <= 1e-10 * max(1.0, np.abs(B).max() * np.abs(u).max())


def test_initial_state(mms_run):
    ex, disc, traj = mms_run
    # pressures and Stokes fields at node 0 are nodal interpolants
    from stokesmpe.fem import interpolate_nodal
    np.testing.assert_allclose(traj.field("pJ", 0), interpolate_nodal(ex.pJ, disc.spaces.pJ, 0.0))
    np.testing.assert_allclose(traj.field("u", 0), interpolate_nodal(ex.u, disc.spaces.u, 0.0))
    with pytest.raises(ValueError):
        run_time_loop(disc, traj.grid, initial_displacement="bogus")


def test_error_decreases_with_refinement():
    ex = ExactSolution()
    errs = []
    for n in (2, 4, 8):
        disc = Discretization(build_two_square_mesh(n), ex.params)
        traj = run_time_loop(disc, TimeGrid(2e-7, 1e-7), ex.sources(), ex.fields, ex.fields)
        e = error_norms(traj, ex)
        errs.append((e.err_d_linf, e.err_J_linf, e.err_u_l2, e.err_J_l2))
    errs = np.array(errs)
    assert np.all(np.diff(errs, axis=0) < 0)


def test_failure_reports_step(disc1, monkeypatch):
    calls = {"n": 0}
    real = DirectSolver.solve

    def flaky(self, rhs):
        calls["n"] += 1
        if calls["n"] == 3:
            raise SingularMatrixError("injected")
        return real(self, rhs)

    monkeypatch.setattr(timeloop.DirectSolver, "solve", flaky)
    with pytest.raises(SingularMatrixError, match="time step 3") as info:
        run_time_loop(disc1, TimeGrid(5.0, 1.0), initial_displacement="interpolate")
    assert info.value.step == 3
