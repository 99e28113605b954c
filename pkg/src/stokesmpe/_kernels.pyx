# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled element kernels; see kernels.py for the numpy reference versions."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def mass(const double[:, ::1] phi_t, const double[:, ::1] phi_s, const double[:, ::1] wdet):
    cdef Py_ssize_t nel = wdet.shape[0], nq = wdet.shape[1]
    cdef Py_ssize_t nt = phi_t.shape[1], ns = phi_s.shape[1]
    cdef Py_ssize_t e, q, a, b
    cdef double w, pa
    out = np.zeros((nel, nt, ns))
    cdef double[:, :, ::1] M = out
    for e in range(nel):
        for q in range(nq):
            w = wdet[e, q]
            for a in range(nt):
                pa = w * phi_t[q, a]
                for b in range(ns):
                    M[e, a, b] += pa * phi_s[q, b]
    return out


def grad_outer(const double[:, :, :, ::1] dphi_t, const double[:, :, :, ::1] dphi_s, const double[:, ::1] wdet):
    cdef Py_ssize_t nel = wdet.shape[0], nq = wdet.shape[1]
    cdef Py_ssize_t nt = dphi_t.shape[2], ns = dphi_s.shape[2]
    cdef Py_ssize_t e, q, a, b
    cdef double w, ax, ay, bx, by
    out = np.zeros((nel, nt, ns, 2, 2))
    cdef double[:, :, :, :, ::1] G = out
    for e in range(nel):
        for q in range(nq):
            w = wdet[e, q]
            for a in range(nt):
                ax = w * dphi_t[e, q, a, 0]
                ay = w * dphi_t[e, q, a, 1]
                for b in range(ns):
                    bx = dphi_s[e, q, b, 0]
                    by = dphi_s[e, q, b, 1]
                    G[e, a, b, 0, 0] += ax * bx
                    G[e, a, b, 0, 1] += ax * by
                    G[e, a, b, 1, 0] += ay * bx
                    G[e, a, b, 1, 1] += ay * by
    return out


def val_grad(const double[:, ::1] phi_t, const double[:, :, :, ::1] dphi_s, const double[:, ::1] wdet):
    cdef Py_ssize_t nel = wdet.shape[0], nq = wdet.shape[1]
    cdef Py_ssize_t nt = phi_t.shape[1], ns = dphi_s.shape[2]
    cdef Py_ssize_t e, q, a, b
    cdef double pa
    out = np.zeros((nel, nt, ns, 2))
    cdef double[:, :, :, ::1] V = out
    for e in range(nel):
        for q in range(nq):
            for a in range(nt):
                pa = wdet[e, q] * phi_t[q, a]
                for b in range(ns):
                    V[e, a, b, 0] += pa * dphi_s[e, q, b, 0]
                    V[e, a, b, 1] += pa * dphi_s[e, q, b, 1]
    return out


def weighted_sq_sum(const double[:, :, ::1] values, const double[:, ::1] wdet):
    cdef Py_ssize_t nel = values.shape[0], nq = values.shape[1], m = values.shape[2]
    cdef Py_ssize_t e, q, c
    cdef double acc, v
    out = np.zeros(nel)
    cdef double[::1] S = out
    for e in range(nel):
        acc = 0.0
        for q in range(nq):
            v = 0.0
            for c in range(m):
                v += values[e, q, c] * values[e, q, c]
            acc += wdet[e, q] * v
        S[e] = acc
    return out
