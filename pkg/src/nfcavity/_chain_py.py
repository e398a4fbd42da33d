"""Pure-numpy fallback for the coupled-mode matrix chain.

Vectorized over wavelengths, looped over segments. Same contract as the
compiled ``_chain.chain_response``.
"""

import numpy as np


def segment_entries(sigma, kappa, length, skew=0.0):
    """Entries (f11, f12, f21, f22) of one segment propagator.

    The propagator is ``exp(W)`` with the traceless generator
    ``W = [[i l s, i l k - e], [-i l k - e, -i l s]]`` and ``e = s * skew``;
    since ``W @ W = q^2 I``, ``exp(W) = cosh(q) I + sinh(q)/q W``. With
    ``skew = 0`` this is the exact uniform-segment solution.
    """
    sigma = np.asarray(sigma, dtype=complex)
    e = sigma * skew
    q2 = length * length * (kappa * kappa - sigma * sigma) + e * e
    q = np.sqrt(q2)
    small = np.abs(q) < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        ch = np.where(small, 1 + q2 / 2 + q2**2 / 24, np.cosh(q))
        shq = np.where(small, 1 + q2 / 6 + q2**2 / 120, np.sinh(q) / np.where(small, 1.0, q))
    return (
        ch + 1j * length * sigma * shq,
        shq * (1j * length * kappa - e),
        shq * (-1j * length * kappa - e),
        ch - 1j * length * sigma * shq,
    )


def chain_response(sigma, lengths, kappa, dc, skew):
    sigma = np.ascontiguousarray(sigma, dtype=complex)
    arrays = [np.ascontiguousarray(a, dtype=float) for a in (lengths, kappa, dc, skew)]
    if len({a.shape for a in arrays}) != 1:
        raise ValueError("segment arrays differ in length")
    m00 = np.ones_like(sigma)
    m01 = np.zeros_like(sigma)
    m10 = np.zeros_like(sigma)
    m11 = np.ones_like(sigma)
    for ell, k, d, sk in zip(*arrays):
        f0, f1, f2, f3 = segment_entries(sigma + d, k, ell, sk)
        m00, m01, m10, m11 = (
            f0 * m00 + f1 * m10,
            f0 * m01 + f1 * m11,
            f2 * m00 + f3 * m10,
            f2 * m01 + f3 * m11,
        )
    out = np.empty((sigma.size, 2, 2), dtype=complex)
    out[:, 0, 0] = m00
    out[:, 0, 1] = m01
    out[:, 1, 0] = m10
    out[:, 1, 1] = m11
    return out
