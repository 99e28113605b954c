"""Element-level integration kernels with a compiled fast path.

The Cython module ``_kernels`` is used when it was built; otherwise (or when
``STOKESMPE_PURE_PYTHON=1`` is set) the numpy implementations below are used.
Both compute the same sums; ``tests/test_kernels.py`` cross-checks them.
``mass`` always uses numpy: with a shared reference basis it is a single BLAS
matrix product, which beats the compiled loop (see ``benchmarks/``).
"""
from __future__ import annotations

import os

import numpy as np

try:
    if os.environ.get("STOKESMPE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _ext
except ImportError:
    _ext = None

BACKEND = "cython" if _ext is not None else "python"


def py_mass(phi_t, phi_s, wdet):
    """``M[e, a, b] = sum_q w[e, q] phi_t[q, a] phi_s[q, b]``."""
    return np.einsum("eq,qa,qb->eab", wdet, phi_t, phi_s, optimize=True)


def py_grad_outer(dphi_t, dphi_s, wdet):
    """``G[e, a, b, k, l] = sum_q w d_k phi_t[a] d_l phi_s[b]``."""
    return np.einsum("eq,eqak,eqbl->eabkl", wdet, dphi_t, dphi_s, optimize=True)


def py_val_grad(phi_t, dphi_s, wdet):
    """``V[e, a, b, k] = sum_q w phi_t[a] d_k phi_s[b]``."""
    return np.einsum("eq,qa,eqbk->eabk", wdet, phi_t, dphi_s, optimize=True)


def py_weighted_sq_sum(values, wdet):
    """Per-cell ``sum_q w |values[e, q, :]|^2``."""
    return np.einsum("eq,eqc,eqc->e", wdet, values, values, optimize=True)


def _c(a):
    return np.ascontiguousarray(a, dtype=float)


if _ext is not None:

    mass = py_mass

    def grad_outer(dphi_t, dphi_s, wdet):
        return _ext.grad_outer(_c(dphi_t), _c(dphi_s), _c(wdet))

    def val_grad(phi_t, dphi_s, wdet):
        return _ext.val_grad(_c(phi_t), _c(dphi_s), _c(wdet))

    def weighted_sq_sum(values, wdet):
        return _ext.weighted_sq_sum(_c(values), _c(wdet))

else:
    mass = py_mass
    grad_outer = py_grad_outer
    val_grad = py_val_grad
    weighted_sq_sum = py_weighted_sq_sum
