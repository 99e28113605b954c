"""Residual a posteriori estimators, exact-error energy norms and the Galerkin check.

All estimator quantities are squared (energy units). Each element term is
weighted by its own diameter ``h_K``; an interior edge contributes once to each
of its two owners. Per-element breakdowns are indexed by global triangle id.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .assembly import Discretization, Sources
from .fem import cell_values, edge_points, evaluate_at_cells, trace_basis

JUMPS = ("traction", "symmetric")


@dataclass
class EstimatorReport:
    E_d_n: np.ndarray  # nodes 0..N
    E_d_dt_n: np.ndarray  # steps 1..N
    E_J_n: np.ndarray  # steps 1..N
    E_up_n: np.ndarray  # steps 1..N
    dt: float
    eta_time: float
    eta_data: float | None = None
    breakdown: dict = field(default_factory=dict, repr=False)

    @property
    def E_d(self) -> float:
        return float(np.max(self.E_d_n))

    @property
    def E_d_dt(self) -> float:
        return float(np.sum(self.dt * np.sqrt(self.E_d_dt_n)) ** 2)

    @property
    def E_J(self) -> float:
        return float(np.sum(self.dt * self.E_J_n))

    @property
    def E_up(self) -> float:
        return float(np.sum(self.dt * self.E_up_n))

    @property
    def eta_ok(self) -> float:
        return self.E_d + self.E_d_dt + self.E_J + self.E_up


@dataclass
class ErrorReport:
    err_d_linf: float
    err_J_linf: float
    err_u_l2: float
    err_J_l2: float
    div_u_l2: float
    eta_data_terms: tuple = ()

    @property
    def ERR_e(self) -> float:
        return self.err_d_linf + self.err_J_linf + self.err_u_l2 + self.err_J_l2

    def efficiency(self, eta_ok: float) -> float:
        return efficiency_index(eta_ok, self.ERR_e)


def efficiency_index(eta_ok: float, err: float) -> float:
    return float(eta_ok) / float(err) if err > 0 else float("inf")


def galerkin_orthogonality_residual(matrix, rhs, x, free=None) -> float:
    """``max |rhs - A x|`` over unconstrained rows, relative to ``||rhs||``."""
    r = np.asarray(rhs, float) - matrix @ np.asarray(x, float)
    if free is not None:
        r = r[free]
    if r.size == 0:
        return 0.0
    nb = np.linalg.norm(rhs)
    top = float(np.max(np.abs(r)))
    return top / nb if nb > 0 else top


def _sym(G):
    return G + np.swapaxes(G, -1, -2)


def _trace_tensor(G):
    return G[..., 0, 0] + G[..., 1, 1]


def stress_el(G, mu, lam):
    """Elastic stress from displacement gradients ``G[..., i, k] = d_k d_i``."""
    return mu * _sym(G) + lam * _trace_tensor(G)[..., None, None] * np.eye(2)


def stress_f(G, mu_f):
    return mu_f * _sym(G)


def jump_sq(v, n, kind: str):
    """Squared pointwise norm of a face residual ``v`` with unit normal ``n``."""
    vv = np.sum(v * v, axis=-1)
    if kind == "traction":
        return vv
    if kind == "symmetric":
        vn = np.sum(v * n, axis=-1)
        return 0.5 * (vv + vn * vn)
    raise ValueError(f"jump must be one of {JUMPS}, got {kind!r}")


class _Trace:
    """Basis of one dof map restricted to edge points from one owning side."""

    def __init__(self, dmap, triangles, points):
        self.dmap = dmap
        self.phi, self.dphi, self.nodes = trace_basis(dmap, triangles, points)

    def __call__(self, coeffs):
        m = self.dmap
        c = np.asarray(coeffs, float).reshape(m.ncomp, m.n_nodes)[:, self.nodes]
        return np.einsum("cea,eqa->eqc", c, self.phi), np.einsum("cea,eqak->eqck", c, self.dphi)


class EstimatorContext:
    """Quadrature data of one discretization reused for every time node."""

    def __init__(self, disc: Discretization, sources: Sources = Sources(), jump: str = "traction"):
        if jump not in JUMPS:
            raise ValueError(f"jump must be one of {JUMPS}, got {jump!r}")
        self.disc, self.sources, self.jump = disc, sources, jump
        self.params = disc.params
        mesh, sp, fac = disc.mesh, disc.spaces, disc.facets
        self.n_tri = len(mesh.triangles)
        order = disc.order
        self.cv_el = cell_values(sp.d, order)
        self.cv_u = cell_values(sp.u, order)
        self.cv_p = cell_values(sp.p, order)
        self.h_el = mesh.diameters[sp.d.cells]
        self.h_f = mesh.diameters[sp.u.cells]

        def faces(edges):
            pts, wl = edge_points(mesh, edges, order)
            return edges, mesh.edge_owners[edges], pts, wl, fac.normals[edges]

        self.ie = faces(fac.interior_elastic)
        e, own, pts, _, _ = self.ie
        self.ie_tr = {s: {"d": _Trace(sp.d, own[:, s], pts), "pJ": _Trace(sp.pJ, own[:, s], pts)} for s in (0, 1)}
        self.if_ = faces(fac.interior_fluid)
        e, own, pts, _, _ = self.if_
        self.if_tr = {s: _Trace(sp.u, own[:, s], pts) for s in (0, 1)}
        self.sig = faces(fac.interface)
        e, own, pts, _, _ = self.sig
        self.sig_tr = {"d": _Trace(sp.d, own[:, 0], pts), "pJ": _Trace(sp.pJ, own[:, 0], pts),
                       "u": _Trace(sp.u, own[:, 1], pts), "p": _Trace(sp.p, own[:, 1], pts)}
        self._src = {}

    # helpers
    def _cells(self, name, x):
        dmap = getattr(self.disc.spaces, name)
        cv = {"d": self.cv_el, "pJ": self.cv_el, "u": self.cv_u, "p": self.cv_p}[name]
        return evaluate_at_cells(x[self.disc.layout[name]], dmap, cv)

    def _face(self, tr, name, x):
        return tr(x[self.disc.layout[name]])

    def _scatter(self, cells_tri, values):
        out = np.zeros(self.n_tri)
        np.add.at(out, cells_tri, values)
        return out

    def _face_to_owners(self, owners, per_face, h_of):
        out = np.zeros(self.n_tri)
        for s in range(owners.shape[1]):
            tri = owners[:, s]
            ok = tri >= 0
            np.add.at(out, tri[ok], h_of[tri[ok]] * per_face[ok])
        return out

    def source_values(self, key: str, t: float) -> np.ndarray | None:
        """Source ``key`` in ``{'f_el', 'g', 'f_f'}`` at the cell quadrature points."""
        ck = (key, float(t))
        if ck not in self._src:
            fn = getattr(self.sources, key)
            cv = self.cv_u if key == "f_f" else self.cv_el
            if fn is None:
                self._src[ck] = None
            else:
                nel, nq, _ = cv.points.shape
                self._src[ck] = np.asarray(fn(t, cv.points.reshape(-1, 2)), float).reshape(nel, nq, -1)
        return self._src[ck]

    def source_difference(self, key, t1, t0, dt):
        a, b = self.source_values(key, t1), self.source_values(key, t0)
        if a is None:
            return None
        return (a - b) / dt

    # residual terms
    def displacement_terms(self, x: np.ndarray, f_el: np.ndarray | None) -> dict:
        """Per-triangle interior, jump and interface terms of the displacement residual."""
        prm, mesh = self.params, self.disc.mesh
        cells = self.disc.spaces.d.cells
        _, Gd, Hd = self._cells("d", x)
        _, Gp, _ = self._cells("pJ", x)
        lap = Hd[:, :, 0, 0] + Hd[:, :, 1, 1]  # (nel, 2)
        grad_div = Hd[:, 0, 0, :] + Hd[:, 1, 1, :]
        alpha = np.asarray(prm.alpha)
        R = (prm.mu_el * lap + (prm.mu_el + prm.lam) * grad_div)[:, None, :] \
            - np.einsum("j,eqjk->eqk", alpha, Gp)
        if f_el is not None:
            R = R + f_el
        interior = self._scatter(cells, self.h_el ** 2 * kernels.weighted_sq_sum(R, self.cv_el.wdet))

        edges, own, pts, wl, nrm = self.ie
        s0 = stress_el(self._face(self.ie_tr[0]["d"], "d", x)[1], prm.mu_el, prm.lam)
        s1 = stress_el(self._face(self.ie_tr[1]["d"], "d", x)[1], prm.mu_el, prm.lam)
        v = -np.einsum("eqik,ek->eqi", s0 - s1, nrm)
        per_face = np.sum(wl * jump_sq(v, nrm[:, None, :], self.jump), axis=1)
        jump = self._face_to_owners(own, per_face, mesh.diameters)

        edges, own, pts, wl, nrm = self.sig
        _, Gd_s = self._face(self.sig_tr["d"], "d", x)
        Pv, _ = self._face(self.sig_tr["pJ"], "pJ", x)
        sn = np.einsum("eqik,ek->eqi", stress_el(Gd_s, prm.mu_el, prm.lam), nrm)
        scal = Pv @ alpha - Pv[:, :, -1]
        v = -sn + scal[:, :, None] * nrm[:, None, :]
        per_face = np.sum(wl * np.sum(v * v, axis=-1), axis=1)
        iface = self._face_to_owners(own[:, :1], per_face, mesh.diameters)
        return {"interior": interior, "jump": jump, "interface": iface}

    def pressure_terms(self, x: np.ndarray, x_prev: np.ndarray, dt: float, g: np.ndarray | None) -> dict:
        prm, mesh = self.params, self.disc.mesh
        cells = self.disc.spaces.pJ.cells
        kap = prm.permeability
        beta = prm.beta_matrix
        c = np.asarray(prm.c)
        alpha = np.asarray(prm.alpha)
        dx = (x - x_prev) / dt
        P, _, Hp = self._cells("pJ", x)
        dP, _, _ = self._cells("pJ", dx)
        _, dGd, _ = self._cells("d", dx)
        div_dd = _trace_tensor(dGd)  # (nel, nq)
        lap = Hp[:, :, 0, 0] + Hp[:, :, 1, 1]  # (nel, nJ)
        exch = P * beta.sum(axis=0) - np.einsum("kj,eqk->eqj", beta, P)
        R = (-c * dP - alpha * div_dd[..., None] + (kap * lap)[:, None, :]
             - np.asarray(prm.beta_e) * P - exch)
        if g is not None:
            R = R + g
        interior = self._scatter(cells, self.h_el ** 2 * kernels.weighted_sq_sum(R, self.cv_el.wdet))

        edges, own, pts, wl, nrm = self.ie
        _, G0 = self._face(self.ie_tr[0]["pJ"], "pJ", x)
        _, G1 = self._face(self.ie_tr[1]["pJ"], "pJ", x)
        jn = kap * np.einsum("eqjk,ek->eqj", G0 - G1, nrm)
        per_face = np.sum(wl * np.sum(jn * jn, axis=-1), axis=1)
        jump = self._face_to_owners(own, per_face, mesh.diameters)

        edges, own, pts, wl, nrm = self.sig
        _, Gs = self._face(self.sig_tr["pJ"], "pJ", x)
        flux = np.einsum("j,eqjk,ek->eq", kap, Gs, nrm)
        dd, _ = self._face(self.sig_tr["d"], "d", dx)
        uu, _ = self._face(self.sig_tr["u"], "u", x)
        r = -flux + np.einsum("eqk,ek->eq", dd, nrm) - np.einsum("eqk,ek->eq", uu, nrm)
        per_face = np.sum(wl * r * r, axis=1)
        iface = self._face_to_owners(own[:, :1], per_face, mesh.diameters)
        return {"interior": interior, "jump": jump, "interface": iface}

    def stokes_terms(self, x: np.ndarray, f_f: np.ndarray | None) -> dict:
        prm, mesh = self.params, self.disc.mesh
        cells = self.disc.spaces.u.cells
        mu = prm.mu_f
        _, Gu, Hu = self._cells("u", x)
        _, Gp, _ = self._cells("p", x)
        lap = Hu[:, :, 0, 0] + Hu[:, :, 1, 1]
        grad_div = Hu[:, 0, 0, :] + Hu[:, 1, 1, :]
        R = (mu * lap + mu * grad_div)[:, None, :] - Gp[:, :, 0, :]
        if f_f is not None:
            R = R + f_f
        interior = self._scatter(cells, self.h_f ** 2 * kernels.weighted_sq_sum(R, self.cv_u.wdet))
        div = _trace_tensor(Gu)[..., None]
        divergence = self._scatter(cells, kernels.weighted_sq_sum(div, self.cv_u.wdet))

        edges, own, pts, wl, nrm = self.if_
        t0 = stress_f(self._face(self.if_tr[0], "u", x)[1], mu)
        t1 = stress_f(self._face(self.if_tr[1], "u", x)[1], mu)
        v = -np.einsum("eqik,ek->eqi", t0 - t1, nrm)
        per_face = np.sum(wl * jump_sq(v, nrm[:, None, :], self.jump), axis=1)
        jump = self._face_to_owners(own, per_face, mesh.diameters)

        edges, own, pts, wl, nrm = self.sig
        nf = -nrm
        _, Gs = self._face(self.sig_tr["u"], "u", x)
        ps, _ = self._face(self.sig_tr["p"], "p", x)
        pE, _ = self._face(self.sig_tr["pJ"], "pJ", x)
        scal = ps[:, :, 0] - pE[:, :, -1]
        v = -np.einsum("eqik,ek->eqi", stress_f(Gs, mu), nf) + scal[:, :, None] * nf[:, None, :]
        per_face = np.sum(wl * np.sum(v * v, axis=-1), axis=1)
        iface = self._face_to_owners(own[:, 1:], per_face, mesh.diameters)
        return {"interior": interior, "divergence": divergence, "jump": jump, "interface": iface}


def _total(parts: dict) -> tuple[float, np.ndarray]:
    per_el = sum(parts.values())
    return float(per_el.sum()), per_el


def _check_node(traj, n, first=0):
    if not first <= n < len(traj.states):
        raise IndexError(f"time node {n} out of range [{first}, {len(traj.states) - 1}]")


def estimate_E_d(ctx: EstimatorContext, traj, n: int):
    """``E_d`` at node ``n`` and its per-triangle breakdown."""
    _check_node(traj, n)
    t = traj.grid.nodes[n]
    return _total(ctx.displacement_terms(traj.states[n], ctx.source_values("f_el", t)))


def estimate_E_d_dt(ctx: EstimatorContext, traj):
    """Aggregate ``E_d(dt)`` and per-step values built from difference quotients."""
    if len(traj.states) < 2:
        raise ValueError("the difference-quotient estimator needs at least two time nodes")
    dt, t = traj.grid.dt, traj.grid.nodes
    vals, per_el = [], []
    for n in range(1, len(traj.states)):
        dx = (traj.states[n] - traj.states[n - 1]) / dt
        tot, el = _total(ctx.displacement_terms(dx, ctx.source_difference("f_el", t[n], t[n - 1], dt)))
        vals.append(tot)
        per_el.append(el)
    vals = np.array(vals)
    return float(np.sum(dt * np.sqrt(vals)) ** 2), vals, np.array(per_el)


def estimate_E_J(ctx: EstimatorContext, traj, n: int):
    _check_node(traj, n, first=1)
    t = traj.grid.nodes[n]
    return _total(ctx.pressure_terms(traj.states[n], traj.states[n - 1], traj.grid.dt,
                                     ctx.source_values("g", t)))


def estimate_E_up(ctx: EstimatorContext, traj, n: int):
    _check_node(traj, n, first=1)
    t = traj.grid.nodes[n]
    return _total(ctx.stokes_terms(traj.states[n], ctx.source_values("f_f", t)))


def eta_time(traj) -> float:
    """Closed form of the time-reconstruction estimator in the ``a_tilde_J`` norm."""
    A = traj.disc.forms["a_tilde_J"]
    sl = traj.disc.layout["pJ"]
    dP = np.diff(traj.states[:, sl], axis=0)
    return float(traj.grid.dt / 3.0 * np.einsum("ni,ni->", dP, (A @ dP.T).T))


def eta_time_quadrature(traj, points: int = 4) -> float:
    """``eta_time`` by Gauss quadrature in time of ``||p_h - pi0 p_h||^2``."""
    A = traj.disc.forms["a_tilde_J"]
    sl = traj.disc.layout["pJ"]
    s, w = np.polynomial.legendre.leggauss(points)
    s, w = 0.5 * (s + 1.0), 0.5 * w
    dt = traj.grid.dt
    total = 0.0
    for n in range(1, len(traj.states)):
        dP = traj.states[n, sl] - traj.states[n - 1, sl]
        q = dP @ (A @ dP)
        # p_h(t) - p^n = (s - 1) dP on the interval
        total += dt * np.sum(w * (s - 1.0) ** 2) * q
    return float(total)


def estimate(traj, sources: Sources = Sources(), jump: str = "traction", exact=None,
             include_eta_data: bool = False) -> EstimatorReport:
    """Every computable estimator of a trajectory."""
    ctx = EstimatorContext(traj.disc, sources, jump)
    N = len(traj.states) - 1
    Ed, Ed_el = zip(*(estimate_E_d(ctx, traj, n) for n in range(N + 1)))
    _, Edt, Edt_el = estimate_E_d_dt(ctx, traj)
    EJ, EJ_el = zip(*(estimate_E_J(ctx, traj, n) for n in range(1, N + 1)))
    Eup, Eup_el = zip(*(estimate_E_up(ctx, traj, n) for n in range(1, N + 1)))
    eta_data = None
    if include_eta_data:
        if exact is None:
            raise ValueError("eta_data needs the exact initial data")
        eta_data = float(sum(initial_error_terms(traj, exact)))
    return EstimatorReport(
        np.array(Ed), Edt, np.array(EJ), np.array(Eup), traj.grid.dt, eta_time(traj), eta_data,
        {"E_d": np.array(Ed_el), "E_d_dt": Edt_el, "E_J": np.array(EJ_el), "E_up": np.array(Eup_el)},
    )


# exact errors

class _ErrorEvaluator:
    def __init__(self, disc: Discretization, exact):
        self.disc, self.exact, self.params = disc, exact, disc.params
        sp = disc.spaces
        self.cv_el = cell_values(sp.d, disc.order)
        self.cv_u = cell_values(sp.u, disc.order)
        self.pts_el = self.cv_el.points.reshape(-1, 2)
        self.pts_u = self.cv_u.points.reshape(-1, 2)

    def _ex(self, fn, t, pts, shape):
        return np.asarray(fn(t, pts), float).reshape(shape)

    def a_el(self, x, t):
        nel, nq, _ = self.cv_el.points.shape
        _, G, _ = evaluate_at_cells(x[self.disc.layout["d"]], self.disc.spaces.d, self.cv_el)
        E = self._ex(self.exact.grad_d, t, self.pts_el, (nel, nq, 2, 2)) - G
        eps = 0.5 * _sym(E)
        prm = self.params
        vals = np.concatenate([np.sqrt(2 * prm.mu_el) * eps.reshape(nel, nq, 4),
                               np.sqrt(prm.lam) * _trace_tensor(E)[..., None]], axis=-1)
        return float(kernels.weighted_sq_sum(vals, self.cv_el.wdet).sum())

    def a_f(self, x, t):
        nel, nq, _ = self.cv_u.points.shape
        _, G, _ = evaluate_at_cells(x[self.disc.layout["u"]], self.disc.spaces.u, self.cv_u)
        E = self._ex(self.exact.grad_u, t, self.pts_u, (nel, nq, 2, 2)) - G
        vals = np.sqrt(2 * self.params.mu_f) * 0.5 * _sym(E).reshape(nel, nq, 4)
        return float(kernels.weighted_sq_sum(vals, self.cv_u.wdet).sum())

    def _eJ(self, x, t):
        nel, nq, _ = self.cv_el.points.shape
        nJ = self.params.n_networks
        V, G, _ = evaluate_at_cells(x[self.disc.layout["pJ"]], self.disc.spaces.pJ, self.cv_el)
        ev = self._ex(self.exact.pJ, t, self.pts_el, (nel, nq, nJ)) - V
        eg = self._ex(self.exact.grad_pJ, t, self.pts_el, (nel, nq, nJ, 2)) - G
        return ev, eg

    def m_J(self, x, t):
        ev, _ = self._eJ(x, t)
        return float(kernels.weighted_sq_sum(np.sqrt(np.asarray(self.params.c)) * ev, self.cv_el.wdet).sum())

    def a_tilde_J(self, x, t):
        prm = self.params
        ev, eg = self._eJ(x, t)
        beta = prm.beta_matrix
        w = self.cv_el.wdet
        total = float(np.einsum("eq,j,eqjk,eqjk->", w, prm.permeability, eg, eg))
        total += float(np.einsum("eq,j,eqj,eqj->", w, np.asarray(prm.beta_e), ev, ev))
        exch = ev * beta.sum(axis=0) - np.einsum("kj,eqk->eqj", beta, ev)
        total += float(np.einsum("eq,eqj,eqj->", w, exch, ev))
        return total

    def div_u(self, x):
        _, G, _ = evaluate_at_cells(x[self.disc.layout["u"]], self.disc.spaces.u, self.cv_u)
        return float(kernels.weighted_sq_sum(_trace_tensor(G)[..., None], self.cv_u.wdet).sum())


def error_norms(traj, exact) -> ErrorReport:
    """Energy-norm errors against ``exact`` (an object exposing fields and gradients)."""
    ev = _ErrorEvaluator(traj.disc, exact)
    t, dt, X = traj.grid.nodes, traj.grid.dt, traj.states
    err_d = max(ev.a_el(X[n], t[n]) for n in range(len(X)))
    err_Jinf = max(ev.m_J(X[n], t[n]) for n in range(len(X)))
    g = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
    err_u = err_J = div_u = 0.0
    for n in range(1, len(X)):
        for s in g:
            x = (1.0 - s) * X[n - 1] + s * X[n]
            tau = t[n - 1] + s * dt
            err_u += 0.5 * dt * ev.a_f(x, tau)
            err_J += 0.5 * dt * ev.a_tilde_J(x, tau)
            div_u += 0.5 * dt * ev.div_u(x)
    return ErrorReport(err_d, err_Jinf, err_u, err_J, div_u, tuple(initial_error_terms(traj, exact, ev)))


def initial_error_terms(traj, exact, ev: _ErrorEvaluator | None = None):
    """Initial-data errors in the ``a_el``, ``a_f`` and ``a_tilde_J`` norms."""
    ev = ev if ev is not None else _ErrorEvaluator(traj.disc, exact)
    x0, t0 = traj.states[0], traj.grid.nodes[0]
    return ev.a_el(x0, t0), ev.a_f(x0, t0), ev.a_tilde_J(x0, t0)
