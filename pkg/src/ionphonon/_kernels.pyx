# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Bloch assembly over k grids, batched Hermitian
eigensolves, and the fixed-step mode-amplitude integrator.

Same contracts as the pure-NumPy twin ``ionphonon._kernels_py``.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin
from scipy.linalg.cython_lapack cimport zheev

cnp.import_array()

COMPILED = True


def assemble_bloch_grid(blocks, rows, cols, disps, n_blocks, onsite, kpts,
                        derivs=False):
    """See ``ionphonon._kernels_py.assemble_bloch_grid``."""
    kpts = np.ascontiguousarray(np.atleast_2d(np.asarray(kpts, dtype=np.float64)))
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] blk = \
        np.ascontiguousarray(blocks, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rr = \
        np.ascontiguousarray(rows, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cc = \
        np.ascontiguousarray(cols, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dd = \
        np.ascontiguousarray(disps, dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] ons = \
        np.ascontiguousarray(onsite, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] kk = kpts

    cdef Py_ssize_t K = kk.shape[0]
    cdef Py_ssize_t P = blk.shape[0]
    cdef Py_ssize_t nb = int(n_blocks)
    cdef Py_ssize_t dim = 2 * nb
    cdef bint want_derivs = bool(derivs)

    cdef cnp.ndarray[cnp.complex128_t, ndim=3] H = \
        np.zeros((K, dim, dim), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] dHx = \
        np.zeros((K, dim, dim), dtype=np.complex128) if want_derivs else \
        np.zeros((1, 1, 1), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] dHy = \
        np.zeros((K, dim, dim), dtype=np.complex128) if want_derivs else \
        np.zeros((1, 1, 1), dtype=np.complex128)

    cdef Py_ssize_t k, p, u, w, r2, c2
    cdef double ang, rx, ry
    cdef double complex ph, fx, fy, b
    with nogil:
        for k in range(K):
            for p in range(P):
                rx = dd[p, 0]
                ry = dd[p, 1]
                ang = kk[k, 0] * rx + kk[k, 1] * ry
                ph = cos(ang) - 1j * sin(ang)
                r2 = 2 * rr[p]
                c2 = 2 * cc[p]
                if want_derivs:
                    fx = -1j * rx * ph
                    fy = -1j * ry * ph
                for u in range(2):
                    for w in range(2):
                        b = blk[p, u, w]
                        H[k, r2 + u, c2 + w] += b * ph
                        if want_derivs:
                            dHx[k, r2 + u, c2 + w] += b * fx
                            dHy[k, r2 + u, c2 + w] += b * fy
            for p in range(nb):
                for u in range(2):
                    for w in range(2):
                        H[k, 2 * p + u, 2 * p + w] += ons[p, u, w]
    if want_derivs:
        return H, dHx, dHy
    return H


def eigh_grid(H):
    """Batched Hermitian eigendecomposition via LAPACK zheev (ascending)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] A = \
        np.ascontiguousarray(H, dtype=np.complex128)
    cdef Py_ssize_t K = A.shape[0]
    cdef int n = <int> A.shape[1]
    if A.shape[2] != n:
        raise ValueError("eigh_grid expects square matrices")

    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.empty((K, n))
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] v = \
        np.empty((K, n, n), dtype=np.complex128)

    # zheev works in place on a Fortran-order matrix; C-order Hermitian input
    # read as Fortran is the conjugate, so eigenvectors come out conjugated.
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] work_a = \
        np.empty((n, n), dtype=np.complex128, order="F")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rwork = \
        np.empty(max(1, 3 * n - 2))
    cdef int lwork = -1
    cdef int info = 0
    cdef double complex wk_query
    cdef char jobz = b'V'
    cdef char uplo = b'L'
    zheev(&jobz, &uplo, &n, &work_a[0, 0], &n, &w[0, 0], &wk_query, &lwork,
          &rwork[0], &info)
    lwork = <int> wk_query.real
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] work = \
        np.empty(lwork, dtype=np.complex128)

    cdef Py_ssize_t k, i, j
    with nogil:
        for k in range(K):
            for i in range(n):
                for j in range(n):
                    work_a[j, i] = A[k, i, j]      # transpose -> conj(H[k])
            zheev(&jobz, &uplo, &n, &work_a[0, 0], &n, &w[k, 0], &work[0],
                  &lwork, &rwork[0], &info)
            if info != 0:
                break
            for i in range(n):
                for j in range(n):
                    v[k, i, j] = work_a[i, j].conjugate()
    if info != 0:
        raise np.linalg.LinAlgError(f"zheev failed with info={info}")
    return w, v


def rk4_drive(energies, forces, omega_d, t_f, dt):
    """See ``ionphonon._kernels_py.rk4_drive``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] E = \
        np.ascontiguousarray(energies, dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] f = \
        np.ascontiguousarray(forces, dtype=np.complex128)
    cdef Py_ssize_t L = E.shape[0]
    cdef Py_ssize_t n_steps = <Py_ssize_t> int(np.ceil(t_f / dt))
    cdef double h = t_f / n_steps
    cdef double wd = omega_d
    cdef double cap = 1e12 * (1.0 + float(np.abs(f).max() if L else 0.0)) \
        * max(float(t_f), 1.0)

    cdef cnp.ndarray[cnp.complex128_t, ndim=1] c = \
        np.zeros(L, dtype=np.complex128)
    cdef Py_ssize_t s, l
    cdef double t = 0.0
    cdef double complex mE, mf, k1, k2, k3, k4
    cdef double cos_t, cos_h, cos_f
    cdef bint blew_up = False
    with nogil:
        for s in range(n_steps):
            cos_t = cos(wd * t)
            cos_h = cos(wd * (t + 0.5 * h))
            cos_f = cos(wd * (t + h))
            for l in range(L):
                mE = -1j * E[l]
                mf = -1j * f[l]
                k1 = mE * c[l] + mf * cos_t
                k2 = mE * (c[l] + 0.5 * h * k1) + mf * cos_h
                k3 = mE * (c[l] + 0.5 * h * k2) + mf * cos_h
                k4 = mE * (c[l] + h * k3) + mf * cos_f
                c[l] = c[l] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                if c[l].real > cap or c[l].real < -cap:
                    blew_up = True
                    break
            if blew_up:
                break
            t += h
    if blew_up:
        raise FloatingPointError(
            "mode-amplitude integration diverged; reduce dt"
        )
    return c
