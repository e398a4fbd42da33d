# cython: language_level=3
"""Compiled coupled-mode matrix chain.

For each wavelength the segment propagators are multiplied left to right.
Each segment is the exponential of a fourth-order Magnus generator built from
two Gauss-point couplings; for a uniform segment it is the exact solution.
"""

import numpy as np
cimport numpy as cnp

cdef extern from "complex.h" nogil:
    double cabs(double complex)
    double creal(double complex)
    double cimag(double complex)


cdef extern from "math.h" nogil:
    double sqrt(double)
    double fabs(double)
    double copysign(double, double)
    double expm1(double)
    double cos(double)
    double sin(double)


cdef inline double complex _sqrt(double complex z) noexcept nogil:
    # principal square root (Re >= 0); |z| is far from overflow here
    cdef double x = creal(z), y = cimag(z)
    cdef double m = sqrt(x * x + y * y)
    cdef double u
    if m == 0.0:
        return 0.0
    if x >= 0.0:
        u = sqrt(0.5 * (m + x))
        return u + 1j * (0.5 * y / u)
    u = sqrt(0.5 * (m - x))
    return 0.5 * fabs(y) / u + 1j * copysign(u, y)


cdef inline void _segment(double complex sig, double kap, double ell, double skew,
                          double complex* f) noexcept nogil:
    # exp(W) for the traceless generator
    #   W = [[i ell sig, i ell kap - e], [-i ell kap - e, -i ell sig]],  e = sig * skew
    # W^2 = q^2 I, so exp(W) = cosh(q) I + sinh(q)/q W.
    cdef double complex e = sig * skew
    cdef double complex q2 = ell * ell * (kap * kap - sig * sig) + e * e
    cdef double complex q = _sqrt(q2)
    cdef double complex ch, shq, isig
    cdef double a, b, ea, em1, cha, sha, cb, sb
    if cabs(q) < 1e-4:
        ch = 1.0 + q2 / 2.0 + q2 * q2 / 24.0
        shq = 1.0 + q2 / 6.0 + q2 * q2 / 120.0
    else:
        # q = a + ib with a >= 0: cosh q = cosh a cos b + i sinh a sin b
        a = creal(q)
        b = cimag(q)
        em1 = expm1(a)
        ea = 1.0 + em1
        cha = 0.5 * (ea + 1.0 / ea)
        # sinh via expm1 keeps full relative precision for small a
        sha = 0.5 * (em1 + em1 / ea)
        cb = cos(b)
        sb = sin(b)
        ch = cha * cb + 1j * (sha * sb)
        shq = (sha * cb + 1j * (cha * sb)) / q
    isig = 1j * ell * sig * shq
    f[0] = ch + isig
    f[1] = shq * (1j * ell * kap - e)
    f[2] = shq * (-1j * ell * kap - e)
    f[3] = ch - isig


def chain_response(double complex[::1] sigma,
                   double[::1] lengths,
                   double[::1] kappa,
                   double[::1] dc,
                   double[::1] skew):
    """Total transfer matrices for every detuning.

    Parameters
    ----------
    sigma : complex array, shape (nw,)
        Detuning per length, imaginary part = half the power attenuation.
    lengths, kappa, dc : float arrays, shape (nseg,)
        Segment lengths, mean coupling per length, and mean DC detuning.
    skew : float array, shape (nseg,)
        Commutator weight ``sqrt(3) ell^2 (k1 - k2) / 6`` from the two
        Gauss-point couplings; zero for uniform segments.

    Returns
    -------
    ndarray, shape (nw, 2, 2), complex
    """
    cdef Py_ssize_t nw = sigma.shape[0]
    cdef Py_ssize_t ns = lengths.shape[0]
    if kappa.shape[0] != ns or dc.shape[0] != ns or skew.shape[0] != ns:
        raise ValueError("segment arrays differ in length")
    out = np.empty((nw, 2, 2), dtype=np.complex128)
    cdef double complex[:, :, ::1] o = out
    cdef Py_ssize_t w, s
    cdef double complex f[4]
    cdef double complex m00, m01, m10, m11, a, b, c, d
    with nogil:
        for w in range(nw):
            m00 = 1.0
            m01 = 0.0
            m10 = 0.0
            m11 = 1.0
            for s in range(ns):
                _segment(sigma[w] + dc[s], kappa[s], lengths[s], skew[s], f)
                a = f[0] * m00 + f[1] * m10
                b = f[0] * m01 + f[1] * m11
                c = f[2] * m00 + f[3] * m10
                d = f[2] * m01 + f[3] * m11
                m00 = a
                m01 = b
                m10 = c
                m11 = d
            o[w, 0, 0] = m00
            o[w, 0, 1] = m01
            o[w, 1, 0] = m10
            o[w, 1, 1] = m11
    return out
