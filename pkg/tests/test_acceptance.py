"""Acceptance suite on the manufactured two-square problem.

Each test records one PASS/FAIL line that is echoed in the pytest terminal summary.
"""
import time

import numpy as np
import pytest

from stokesmpe.assembly import Discretization, ParameterSet, interpolate_state
from stokesmpe.estimators import error_norms, estimate, eta_time, eta_time_quadrature
from stokesmpe.fem import interpolate_nodal
from stokesmpe.harness import ConvergenceConfig, rates, run_convergence_study
from stokesmpe.mesh import build_two_square_mesh
from stokesmpe.mms import ExactSolution, random_interior_points, verify_sources_fd
from stokesmpe.timeloop import TimeGrid, run_time_loop


@pytest.fixture(scope="module")
def study():
    start = time.perf_counter()
    rows = run_convergence_study(ConvergenceConfig())
    return rows, time.perf_counter() - start


def test_reliability(study, acceptance_line):
    rows, elapsed = study
    ok = all(r.ERR_e <= r.eta_ok for r in rows) and elapsed < 300
    ratios = ", ".join(f"{r.eta_ok / r.ERR_e:.1f}" for r in rows)
    acceptance_line(1, ok, f"ERR_e <= eta_ok on n={[r.n for r in rows]} (eta_ok/ERR_e: {ratios}); "
                           f"runtime {elapsed:.1f}s < 300s")
    assert ok


def test_efficiency(study, acceptance_line):
    rows, _ = study
    ieff = [r.I_eff for r in rows]
    var = abs(ieff[-1] - ieff[-2]) / ieff[-2]
    ok = min(ieff) >= 1.0 and var < 0.2
    acceptance_line(2, ok, f"I_eff = {[round(v, 2) for v in ieff]}, min >= 1, "
                           f"variation on finest pair {100 * var:.2f}% < 20%")
    assert ok


def test_convergence_rates(study, acceptance_line):
    rows, _ = study
    r_err = rates(rows, "ERR_e")[-1]
    r_eta = rates(rows, "eta_ok")[-1]
    ok = r_err >= 3.5 and abs(r_eta - r_err) <= 0.5
    acceptance_line(3, ok, f"ERR_e rate {r_err:.3f} >= 3.5, eta_ok rate {r_eta:.3f} within 0.5")
    assert ok


def test_component_tracking(study, acceptance_line):
    rows, _ = study
    up, eu = rates(rows, "E_up")[-1], rates(rows, "err_u_l2")[-1]
    ed, errd = rates(rows, "E_d")[-1], rates(rows, "err_d_linf")[-1]
    ok = abs(up - eu) <= 0.5 and abs(ed - errd) <= 0.5
    acceptance_line(4, ok, f"E_up rate {up:.3f} vs err_u {eu:.3f}; E_d rate {ed:.3f} vs err_d {errd:.3f}")
    assert ok


def test_galerkin_orthogonality(study, acceptance_line):
    rows, _ = study
    worst = max(r.galerkin_max for r in rows)
    ok = worst <= 1e-9
    acceptance_line(5, ok, f"max unconstrained residual over all steps and levels {worst:.2e} <= 1e-9")
    assert ok


def test_source_oracle(acceptance_line):
    ex = ExactSolution()
    x = random_interior_points(100, np.random.default_rng(2024))
    worst = {k: 0.0 for k in ("el", "J", "f", "div")}
    for t in (0.0, 2.5e-7, 5e-7):
        r = verify_sources_fd(ex, t, x, step=1e-4)
        for k in ("el", "J", "f"):
            worst[k] = max(worst[k], float(np.max(r[k] / r["scale_" + k])))
        worst["div"] = max(worst["div"], float(np.max(r["div"])))
    ok = max(worst["el"], worst["J"], worst["f"]) <= 1e-5 and worst["div"] <= 1e-10
    acceptance_line(6, ok, "FD residuals (rel) " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    assert ok


def test_time_estimator_scaling(acceptance_line):
    ex = ExactSolution()
    disc = Discretization(build_two_square_mesh(16), ex.params)
    vals, quad_err = [], 0.0
    for dt in (1e-7, 5e-8):
        traj = run_time_loop(disc, TimeGrid(5e-7, dt), ex.sources(), ex.fields, ex.fields)
        closed = eta_time(traj)
        quad_err = max(quad_err, abs(eta_time_quadrature(traj, 4) - closed) / closed)
        vals.append(closed)
    factor = vals[0] / vals[1]
    ok = 3.2 <= factor <= 4.8 and quad_err <= 1e-12
    acceptance_line(7, ok, f"eta_time reduction {factor:.3f} in [3.2, 4.8]; "
                           f"closed form vs 4-point quadrature {quad_err:.1e} <= 1e-12")
    assert ok


class ZeroSolution:
    def _v(self, t, x):
        return np.zeros((len(x), 2))

    def _g(self, t, x):
        return np.zeros((len(x), 2, 2))

    d = u = _v
    grad_d = grad_u = _g

    def pJ(self, t, x):
        return np.zeros((len(x), 1))

    def grad_pJ(self, t, x):
        return np.zeros((len(x), 1, 2))


def test_degenerate_inputs(acceptance_line):
    disc = Discretization(build_two_square_mesh(4), ParameterSet.unit())
    traj = run_time_loop(disc, TimeGrid(5e-7, 1e-7))
    rep = estimate(traj)
    err = error_norms(traj, ZeroSolution())
    zero = (np.all(traj.states == 0) and rep.eta_ok == 0 and rep.eta_time == 0 and err.ERR_e == 0)

    F, s = disc.forms, disc.spaces
    rng = np.random.default_rng(8)
    sym = coer = True
    for name, dmap in (("a_el", s.d), ("a_f", s.u), ("m_J", None), ("a_tilde_J", s.pJ)):
        A = F[name]
        sym &= abs(A - A.T).max() <= 1e-13 * abs(A).max()
        for _ in range(50):
            v = rng.normal(size=A.shape[0])
            if dmap is not None:
                v[dmap.dirichlet_dofs] = 0.0
            coer &= v @ A @ v > 0
    fn = lambda t, x: np.column_stack([np.cos(x[:, 1]), x[:, 1] ** 2])  # noqa: E731
    p = interpolate_nodal(lambda t, x: 1 + x[:, 1], s.pJ)
    iface = abs(interpolate_nodal(fn, s.d) @ F["J_el"] @ p + interpolate_nodal(fn, s.u) @ F["J_f"] @ p)
    ok = bool(zero and sym and coer and iface < 1e-14)
    acceptance_line(8, ok, f"zero data -> zero states/estimators/errors: {zero}; symmetry: {sym}; "
                           f"coercivity proxy: {coer}; |J_el + J_f| = {iface:.1e}")
    assert ok


def test_unit_values(acceptance_line):
    disc = Discretization(build_two_square_mesh(1), ParameterSet.unit())
    s, F = disc.spaces, disc.forms
    xfield = lambda t, x: np.column_stack([x[:, 0], 0 * x[:, 0]])  # noqa: E731
    ex_fluid = lambda t, x: np.tile([1.0, 0.0], (len(x), 1))  # noqa: E731
    d = interpolate_nodal(xfield, s.d)
    u = interpolate_nodal(xfield, s.u)
    a_el = d @ F["a_el"] @ d
    b_f = u @ F["b_f"] @ np.ones(s.p.ndofs)
    j_f = interpolate_nodal(ex_fluid, s.u) @ F["J_f"] @ np.ones(s.pJ.ndofs)
    ok = abs(a_el - 0.75) <= 1e-12 and abs(b_f + 0.25) <= 1e-12 and abs(j_f + 0.5) <= 1e-12
    acceptance_line(9, ok, f"a_el = {a_el:.15f}, b_f = {b_f:.15f}, J_f = {j_f:.15f}")
    assert ok
    assert interpolate_state(disc, {}, 0.0).shape == (disc.ndofs,)
