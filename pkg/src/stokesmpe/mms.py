"""Manufactured solution on the two-square geometry and its source terms.

The exact fields are divergence free in both subdomains, so the sources reduce to

    f_el = 2 pi^2 mu_el d + alpha grad p_E
    g_E  = c dp_E/dt + (kappa/mu_E) pi^2 p_E + beta_E p_E
    f_f  = 2 pi^2 mu_f u + grad p

``verify_sources_fd`` checks these against finite differences of the fields.
"""
from __future__ import annotations

import numpy as np

from .assembly import ParameterSet, Sources

PI = np.pi


class ExactSolution:
    """Closed-form ``d``, ``p_E``, ``u``, ``p`` with analytic gradients.

    Every field is a callable ``f(t, points)`` with ``points`` of shape ``(n, 2)``;
    vector fields return ``(n, 2)``, scalars ``(n,)``, gradients ``(n, ncomp, 2)``.
    """

    def __init__(self, params: ParameterSet | None = None):
        self.params = params if params is not None else ParameterSet.unit()
        if self.params.n_networks != 1:
            raise ValueError("the manufactured solution has a single network")
        prm = self.params
        self.alpha = prm.alpha[0]
        self.kappa = prm.kappa[0]
        self.eta = prm.mu_el / (prm.mu_f * (1.0 - self.alpha))
        self.m = prm.mu_f * self.kappa / prm.mu_el

    # time profiles
    def _C(self, t):
        return np.cos(self.eta * t) - np.sin(self.eta * t)

    def _dC(self, t):
        return -self.eta * (np.sin(self.eta * t) + np.cos(self.eta * t))

    def _P(self, t):
        return 1.5 * np.cos(self.eta * t) - 0.5 * np.sin(self.eta * t)

    @staticmethod
    def _xy(x):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        return x[:, 0], x[:, 1]

    def _S(self, x):
        X, Y = self._xy(x)
        return np.sin(PI * X) * np.sin(PI * Y) - np.cos(PI * X) * np.cos(PI * Y)

    def _dS(self, x):
        # S = -cos(pi (x + y)), so both partials equal pi sin(pi (x + y))
        X, Y = self._xy(x)
        return PI * np.sin(PI * (X + Y))

    def _q(self, x, scale):
        X, Y = self._xy(x)
        return X * np.cos(PI * Y) + scale * self.m * np.sin(PI * Y)

    def _dq(self, x, scale):
        X, Y = self._xy(x)
        return np.stack([np.cos(PI * Y), -PI * X * np.sin(PI * Y) + scale * PI * self.m * np.cos(PI * Y)], axis=-1)

    # displacement
    def d_amplitude(self, t):
        return self._C(t) * PI * self.kappa / self.eta

    def d(self, t, x):
        return self.d_amplitude(t) * self._S(x)[:, None] * np.array([1.0, -1.0])

    def grad_d(self, t, x):
        g = self.d_amplitude(t) * self._dS(x)
        return g[:, None, None] * np.array([1.0, -1.0])[None, :, None] * np.ones(2)[None, None, :]

    def d_t(self, t, x):
        return self._dC(t) * PI * self.kappa / self.eta * self._S(x)[:, None] * np.array([1.0, -1.0])

    # network pressure (E); the ``pJ`` aliases serve the single-network layout
    def p_E(self, t, x):
        return -self._C(t) * PI * self._q(x, 2.0 * PI)

    def grad_p_E(self, t, x):
        return -self._C(t) * PI * self._dq(x, 2.0 * PI)

    def p_E_t(self, t, x):
        return -self._dC(t) * PI * self._q(x, 2.0 * PI)

    def pJ(self, t, x):
        return self.p_E(t, x)[:, None]

    def grad_pJ(self, t, x):
        return self.grad_p_E(t, x)[:, None, :]

    # Stokes velocity and pressure
    def u_amplitude(self, t):
        return 2.0 * np.cos(self.eta * t) * PI * self.kappa / self.params.mu_el

    def u(self, t, x):
        return self.u_amplitude(t) * self._S(x)[:, None] * np.array([-1.0, 1.0])

    def grad_u(self, t, x):
        g = self.u_amplitude(t) * self._dS(x)
        return g[:, None, None] * np.array([-1.0, 1.0])[None, :, None] * np.ones(2)[None, None, :]

    def p(self, t, x):
        return -self._P(t) * self._q(x, 4.0 * PI ** 2)

    def grad_p(self, t, x):
        return -self._P(t) * self._dq(x, 4.0 * PI ** 2)

    # sources
    def f_el(self, t, x):
        return 2.0 * PI ** 2 * self.params.mu_el * self.d(t, x) + self.alpha * self.grad_p_E(t, x)

    def g_E(self, t, x):
        prm = self.params
        return (prm.c[0] * self.p_E_t(t, x)
                + (prm.permeability[0] * PI ** 2 + prm.beta_e[0]) * self.p_E(t, x))

    def g(self, t, x):
        return self.g_E(t, x)[:, None]

    def f_f(self, t, x):
        return 2.0 * PI ** 2 * self.params.mu_f * self.u(t, x) + self.grad_p(t, x)

    def sources(self) -> Sources:
        return Sources(self.f_el, self.g, self.f_f)

    @property
    def fields(self) -> dict:
        """Initial and boundary data keyed by field name."""
        return {"d": self.d, "pJ": self.pJ, "u": self.u, "p": self.p}

    @property
    def gradients(self) -> dict:
        return {"d": self.grad_d, "pJ": self.grad_pJ, "u": self.grad_u}


def _fd_weights():
    # fourth-order central stencils on offsets -2..2
    d1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    d2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    return d1, d2


def _fd_derivatives(f, t, x, h):
    """Gradient ``(n, m, 2)`` and Hessian ``(n, m, 2, 2)`` of ``f(t, x) -> (n, m)``."""
    d1, d2 = _fd_weights()
    offs = np.arange(-2, 3)
    x = np.asarray(x, float).reshape(-1, 2)

    def ev(sx, sy):
        v = f(t, x + h * np.array([sx, sy]))
        return v.reshape(len(x), -1)

    m = ev(0, 0).shape[1]
    grad = np.zeros((len(x), m, 2))
    hess = np.zeros((len(x), m, 2, 2))
    for k, o in enumerate(offs):
        if o == 0:
            hess[:, :, 0, 0] += d2[k] * ev(0, 0)
            hess[:, :, 1, 1] += d2[k] * ev(0, 0)
            continue
        ex, ey = ev(o, 0), ev(0, o)
        grad[:, :, 0] += d1[k] * ex
        grad[:, :, 1] += d1[k] * ey
        hess[:, :, 0, 0] += d2[k] * ex
        hess[:, :, 1, 1] += d2[k] * ey
    for a, oa in enumerate(offs):
        for b, ob in enumerate(offs):
            if oa and ob:
                hess[:, :, 0, 1] += d1[a] * d1[b] * ev(oa, ob)
    hess[:, :, 1, 0] = hess[:, :, 0, 1]
    return grad / h, hess / h ** 2


def verify_sources_fd(exact: ExactSolution, t: float, x, step: float = 1e-4, sources: Sources | None = None) -> dict:
    """Residuals of the four bulk equations at ``x`` using finite differences.

    Returns a dict with absolute residuals (``el``, ``J``, ``f``, ``div``) and the
    local field scales used for relative tolerances, each of shape ``(n,)``.
    """
    prm = exact.params
    src = sources if sources is not None else exact.sources()
    x = np.asarray(x, float).reshape(-1, 2)
    mu, lam, mu_f = prm.mu_el, prm.lam, prm.mu_f

    gd, Hd = _fd_derivatives(exact.d, t, x, step)
    lap_d = Hd[:, :, 0, 0] + Hd[:, :, 1, 1]
    grad_div_d = Hd[:, 0, :, 0] + Hd[:, 1, :, 1]
    gpE, HpE = _fd_derivatives(exact.p_E, t, x, step)
    f_el = np.asarray(src.f_el(t, x)).reshape(len(x), 2)
    r_el = -mu * lap_d - (mu + lam) * grad_div_d + exact.alpha * gpE[:, 0, :] - f_el
    s_el = np.maximum.reduce([np.abs(mu * lap_d).max(1), np.abs(exact.alpha * gpE[:, 0]).max(1),
                              np.abs(f_el).max(1), np.ones(len(x))])

    gdt, _ = _fd_derivatives(exact.d_t, t, x, step)
    div_dt = gdt[:, 0, 0] + gdt[:, 1, 1]
    lap_pE = HpE[:, 0, 0, 0] + HpE[:, 0, 1, 1]
    g = np.asarray(src.g(t, x)).reshape(len(x))
    c_term = prm.c[0] * exact.p_E_t(t, x)
    k_term = prm.permeability[0] * lap_pE
    r_J = c_term + exact.alpha * div_dt - k_term + prm.beta_e[0] * exact.p_E(t, x) - g
    s_J = np.maximum.reduce([np.abs(c_term), np.abs(k_term), np.abs(g), np.ones(len(x))])

    gu, Hu = _fd_derivatives(exact.u, t, x, step)
    lap_u = Hu[:, :, 0, 0] + Hu[:, :, 1, 1]
    grad_div_u = Hu[:, 0, :, 0] + Hu[:, 1, :, 1]
    gp, _ = _fd_derivatives(exact.p, t, x, step)
    f_f = np.asarray(src.f_f(t, x)).reshape(len(x), 2)
    r_f = -mu_f * lap_u - mu_f * grad_div_u + gp[:, 0, :] - f_f
    s_f = np.maximum.reduce([np.abs(mu_f * lap_u).max(1), np.abs(gp[:, 0]).max(1),
                             np.abs(f_f).max(1), np.ones(len(x))])

    div_u = gu[:, 0, 0] + gu[:, 1, 1]
    return {
        "el": np.linalg.norm(r_el, axis=1), "J": np.abs(r_J), "f": np.linalg.norm(r_f, axis=1),
        "div": np.abs(div_u),
        "scale_el": s_el, "scale_J": s_J, "scale_f": s_f,
    }


def random_interior_points(n: int, rng: np.random.Generator, margin: float = 1e-3) -> np.ndarray:
    """Points uniformly drawn in both squares, ``margin`` away from all edges and the interface."""
    side = rng.integers(0, 2, size=n)
    pts = rng.uniform(margin, 0.5 - margin, size=(n, 2))
    pts[:, 0] -= 0.5 * (side == 0)
    return pts


def interface_residuals(exact: ExactSolution, t: float, y) -> dict:
    """Interface-condition residuals of the exact fields at points ``(0, y)``.

    Returns the maximum magnitudes of the elastic traction balance, the normal
    flux balance and the fluid traction balance, each as seen by the weak form.
    """
    prm = exact.params
    y = np.asarray(y, float).ravel()
    x = np.stack([np.zeros_like(y), y], axis=-1)
    n_el = np.array([1.0, 0.0])
    n_f = -n_el
    Gd = exact.grad_d(t, x)
    sig = prm.mu_el * (Gd + np.swapaxes(Gd, 1, 2)) + prm.lam * np.einsum("nii->n", Gd)[:, None, None] * np.eye(2)
    pE = exact.p_E(t, x)
    r_d = -sig @ n_el + ((exact.alpha - 1.0) * pE)[:, None] * n_el
    r_J = (-prm.permeability[0] * exact.grad_p_E(t, x) @ n_el + exact.d_t(t, x) @ n_el
           + exact.u(t, x) @ n_f)
    Gu = exact.grad_u(t, x)
    tau = prm.mu_f * (Gu + np.swapaxes(Gu, 1, 2))
    r_u = -tau @ n_f + (exact.p(t, x) - pE)[:, None] * n_f
    return {"d": float(np.abs(r_d).max()), "J": float(np.abs(r_J).max()), "u": float(np.abs(r_u).max())}
