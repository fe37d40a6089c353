# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory kernels for quadratic node objectives.

Semantics mirror markov_admm._kernels_py exactly; see that module for the
update formulas.  Inputs are never mutated; the final state is returned
alongside the four per-iteration metric arrays.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef void _x_update(double[:, ::1] x, const double[:, ::1] targets,
                    double[:, ::1] beta, double rho,
                    const long[::1] nbr_indptr, const long[::1] nbr_nodes,
                    const long[::1] nbr_arcs,
                    Py_ssize_t i, double[::1] scratch) noexcept nogil:
    """Closed-form local minimization for node i, written into scratch."""
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t lo = nbr_indptr[i], hi = nbr_indptr[i + 1]
    cdef Py_ssize_t s, c
    cdef double deg = <double> (hi - lo)
    cdef double s_beta, s_x
    for c in range(d):
        s_beta = 0.0
        s_x = 0.0
        for s in range(lo, hi):
            s_beta += beta[nbr_arcs[s], c]
            s_x += x[nbr_nodes[s], c]
        scratch[c] = (targets[i, c] - s_beta + rho * (deg * x[i, c] + s_x) / 2.0) \
            / (1.0 + rho * deg)


cdef void _metrics(double rho,
                   double[:, ::1] x, double[:, ::1] beta, double[:, ::1] z,
                   const double[:, ::1] targets,
                   const long[::1] arc_src, const long[::1] arc_dst,
                   const double[::1] x_star, const double[:, ::1] z_star,
                   const double[:, ::1] beta_star, double f_star,
                   double* g_err, double* x_err, double* obj_gap,
                   double* cons) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], na = beta.shape[0]
    cdef Py_ssize_t i, q, c
    cdef double acc_z = 0.0, acc_b = 0.0, acc_x = 0.0, acc_o = 0.0, acc_c = 0.0
    cdef double t
    for q in range(na):
        for c in range(d):
            t = z[q, c] - z_star[q, c]
            acc_z += t * t
            t = beta[q, c] - beta_star[q, c]
            acc_b += t * t
            t = x[arc_src[q], c] - x[arc_dst[q], c]
            acc_c += t * t
    for i in range(n):
        for c in range(d):
            t = x[i, c] - x_star[c]
            acc_x += t * t
            t = x[i, c] - targets[i, c]
            acc_o += t * t
    g_err[0] = rho * acc_z + acc_b / rho
    x_err[0] = acc_x
    obj_gap[0] = acc_o - f_star
    cons[0] = sqrt(acc_c)


def sync_trajectory(const double[:, ::1] x0, const double[:, ::1] targets,
                    const double[:, ::1] beta0, const double[:, ::1] z0, double rho,
                    const long[::1] arc_src, const long[::1] arc_dst,
                    const long[::1] nbr_indptr, const long[::1] nbr_nodes,
                    const long[::1] nbr_arcs,
                    Py_ssize_t iterations,
                    const double[::1] x_star, const double[:, ::1] z_star,
                    const double[:, ::1] beta_star, double f_star):
    cdef Py_ssize_t n = x0.shape[0], d = x0.shape[1], na = beta0.shape[0]
    x_arr = np.array(x0, dtype=np.float64)
    beta_arr = np.array(beta0, dtype=np.float64)
    z_arr = np.array(z0, dtype=np.float64)
    xn_arr = np.empty_like(x_arr)
    g_arr = np.empty(iterations + 1)
    xe_arr = np.empty(iterations + 1)
    o_arr = np.empty(iterations + 1)
    c_arr = np.empty(iterations + 1)
    cdef double[:, ::1] x = x_arr, beta = beta_arr, z = z_arr, x_new = xn_arr
    cdef double[::1] g_err = g_arr, x_err = xe_arr, obj_gap = o_arr, cons = c_arr
    cdef Py_ssize_t k, i, q, c
    cdef double[:, ::1] tmp

    with nogil:
        _metrics(rho, x, beta, z, targets, arc_src, arc_dst, x_star, z_star,
                 beta_star, f_star, &g_err[0], &x_err[0], &obj_gap[0], &cons[0])
        for k in range(1, iterations + 1):
            for i in range(n):
                _x_update(x, targets, beta, rho, nbr_indptr, nbr_nodes,
                          nbr_arcs, i, x_new[i])
            tmp = x
            x = x_new
            x_new = tmp
            for q in range(na):
                for c in range(d):
                    beta[q, c] += 0.5 * rho * (x[arc_src[q], c] - x[arc_dst[q], c])
                    z[q, c] = 0.5 * (x[arc_src[q], c] + x[arc_dst[q], c])
            _metrics(rho, x, beta, z, targets, arc_src, arc_dst, x_star, z_star,
                     beta_star, f_star, &g_err[k], &x_err[k], &obj_gap[k], &cons[k])

    final_x = np.array(x, dtype=np.float64)
    return g_arr, xe_arr, o_arr, c_arr, final_x, beta_arr, z_arr


def async_trajectory(const double[:, ::1] x0, const double[:, ::1] targets,
                     const double[:, ::1] beta0, const double[:, ::1] z0, double rho,
                     const long[::1] arc_src, const long[::1] arc_dst,
                     const long[::1] nbr_indptr, const long[::1] nbr_nodes,
                     const long[::1] nbr_arcs,
                     const long[::1] path_states,
                     const double[::1] x_star, const double[:, ::1] z_star,
                     const double[:, ::1] beta_star, double f_star):
    cdef Py_ssize_t n = x0.shape[0], d = x0.shape[1], na = beta0.shape[0]
    cdef Py_ssize_t iterations = path_states.shape[0] - 1
    x_arr = np.array(x0, dtype=np.float64)
    beta_arr = np.array(beta0, dtype=np.float64)
    z_arr = np.array(z0, dtype=np.float64)
    g_arr = np.empty(iterations + 1)
    xe_arr = np.empty(iterations + 1)
    o_arr = np.empty(iterations + 1)
    c_arr = np.empty(iterations + 1)
    scratch_arr = np.empty(x_arr.shape[1])
    cdef double[:, ::1] x = x_arr, beta = beta_arr, z = z_arr
    cdef double[::1] g_err = g_arr, x_err = xe_arr, obj_gap = o_arr, cons = c_arr
    cdef double[::1] scratch = scratch_arr
    cdef Py_ssize_t k, i, j, q, qm, s, c
    cdef double nb, avg

    with nogil:
        _metrics(rho, x, beta, z, targets, arc_src, arc_dst, x_star, z_star,
                 beta_star, f_star, &g_err[0], &x_err[0], &obj_gap[0], &cons[0])
        for k in range(1, iterations + 1):
            j = path_states[k - 1]
            i = path_states[k]
            _x_update(x, targets, beta, rho, nbr_indptr, nbr_nodes, nbr_arcs,
                      i, scratch)
            for c in range(d):
                x[i, c] = scratch[c]
            if i != j:
                # locate arc (i, j) among i's slots; path support guarantees
                # it exists, the guard only protects memory on bad input
                q = -1
                for s in range(nbr_indptr[i], nbr_indptr[i + 1]):
                    if nbr_nodes[s] == j:
                        q = nbr_arcs[s]
                        break
                if q >= 0:
                    qm = q ^ 1
                    for c in range(d):
                        nb = beta[q, c] + 0.5 * rho * (x[i, c] - x[j, c])
                        beta[q, c] = nb
                        beta[qm, c] = -nb
                        avg = 0.5 * (x[i, c] + x[j, c])
                        z[q, c] = avg
                        z[qm, c] = avg
            _metrics(rho, x, beta, z, targets, arc_src, arc_dst, x_star, z_star,
                     beta_star, f_star, &g_err[k], &x_err[k], &obj_gap[k], &cons[k])

    return g_arr, xe_arr, o_arr, c_arr, x_arr, beta_arr, z_arr
