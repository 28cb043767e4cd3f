# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics match `_kernels_py` exactly."""

from libc.math cimport fabs, fmax, pow
from libc.stdint cimport int64_t

BACKEND = "compiled"


def q_node_pass(const double[:, ::1] y2, const double[::1] w,
                const double[::1] lam_t, const double[::1] lam,
                double inv2d, double floor):
    """Fused reduction over quadrature nodes; see `_kernels_py.q_node_pass`."""
    cdef Py_ssize_t n = y2.shape[0]
    cdef Py_ssize_t d = y2.shape[1]
    cdef Py_ssize_t i, j
    cdef double qd = 0.0, t1 = 0.0, t2 = 0.0, t3 = 0.0, sdd = 0.0
    cdef double s1, s2, s1o, s2o, pt, g2t, p, g2, tau2, dev, wi, inv_pt
    cdef double lt2[8]
    cdef double lo2[8]
    if d > 8:
        raise ValueError("q_node_pass supports dimension <= 8")
    for j in range(d):
        lt2[j] = lam_t[j] * lam_t[j]
        lo2[j] = lam[j] * lam[j]
    for i in range(n):
        s1 = 0.0; s2 = 0.0; s1o = 0.0; s2o = 0.0
        for j in range(d):
            s1 += lam_t[j] * y2[i, j]
            s2 += lt2[j] * y2[i, j]
            s1o += lam[j] * y2[i, j]
            s2o += lo2[j] * y2[i, j]
        pt = 0.5 * s1
        g2t = s2
        p = 0.5 * s1o
        g2 = s2o
        tau2 = g2 - 4.0 * p * p
        dev = p - inv2d
        wi = w[i]
        t1 += wi * tau2
        t2 += wi * dev * dev
        if pt > floor:
            inv_pt = 1.0 / pt
            qd += wi * (g2t * inv_pt) * (pt - inv2d)
            t3 += wi * tau2 * inv_pt
            sdd += wi * tau2 * dev * dev * inv_pt * inv_pt * inv_pt
    return qd, t1, t2, t3, sdd


def sor_color_pass(double[::1] u, const int64_t[::1] idx,
                   const int64_t[:, ::1] nb, double gamma, double delta,
                   double omega, double h2, double inv_twod):
    """One projected SOR half-sweep; see `_kernels_py.sor_color_pass`."""
    cdef Py_ssize_t m = idx.shape[0]
    cdef Py_ssize_t k = nb.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, ui, rhs, target
    cdef double gm1 = gamma - 1.0
    for i in range(m):
        s = 0.0
        for j in range(k):
            s += u[nb[i, j]]
        ui = u[idx[i]]
        rhs = gamma * pow(fmax(ui, delta), gm1)
        target = (s - h2 * rhs) * inv_twod
        u[idx[i]] = fmax((1.0 - omega) * ui + omega * target, 0.0)


def projected_residual(const double[::1] u, const int64_t[::1] idx,
                       const int64_t[:, ::1] nb, double gamma, double delta,
                       double h2, double inv_twod):
    """Sup of the projected fixed-point residual; see `_kernels_py`."""
    cdef Py_ssize_t m = idx.shape[0]
    cdef Py_ssize_t k = nb.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, ui, rhs, target, proj, r
    cdef double best = 0.0
    cdef double gm1 = gamma - 1.0
    for i in range(m):
        s = 0.0
        for j in range(k):
            s += u[nb[i, j]]
        ui = u[idx[i]]
        rhs = gamma * pow(fmax(ui, delta), gm1)
        target = (s - h2 * rhs) * inv_twod
        proj = fmax(target, 0.0)
        r = fabs(proj - ui)
        if r > best:
            best = r
    return best / (h2 * inv_twod)
