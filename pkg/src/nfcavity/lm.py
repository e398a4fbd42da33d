"""Levenberg-Marquardt least squares with an iteration trace."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray


class SingularFitError(ArithmeticError):
    """Normal equations are singular; the data do not constrain the model."""


@dataclass
class LMResult:
    params: NDArray[np.float64]
    covariance: NDArray[np.float64]
    cost: float
    converged: bool
    n_iter: int
    #: cost (sum of squared residuals) after each accepted step, starting with the initial cost
    trace: list[float] = field(default_factory=list)


def levenberg_marquardt(
    residuals: Callable[[NDArray], NDArray],
    jacobian: Callable[[NDArray], NDArray],
    p0,
    max_iter: int = 200,
    xtol: float = 1e-8,
    lam0: float = 1e-3,
) -> LMResult:
    """Minimize ``sum(residuals(p)**2)``.

    Marquardt's scaled damping ``(J^T J + lam diag(J^T J)) dp = -J^T r``. A trial
    step is accepted only if it lowers the cost, so the trace is monotone.
    Stops when an accepted step satisfies ``|dp| < xtol * (|p| + xtol)``, when
    the cost reaches zero, or after ``max_iter`` iterations (then
    ``converged`` is False).
    """
    p = np.array(p0, dtype=float)
    r = residuals(p)
    cost = float(r @ r)
    trace = [cost]
    lam = lam0
    converged = cost == 0.0
    it = 0
    while not converged and it < max_iter:
        it += 1
        J = jacobian(p)
        A = J.T @ J
        g = J.T @ r
        d = np.diag(A).copy()
        if np.any(d <= 0) or not np.all(np.isfinite(A)):
            raise SingularFitError("parameter has no effect on the residuals")
        accepted = False
        while lam < 1e16:
            try:
                dp = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError as exc:
                raise SingularFitError(str(exc)) from exc
            p_new = p + dp
            r_new = residuals(p_new)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no descent direction left at machine precision
            converged = True
            break
        small = np.linalg.norm(dp) < xtol * (np.linalg.norm(p) + xtol)
        p, r, cost = p_new, r_new, cost_new
        trace.append(cost)
        lam = max(lam / 10.0, 1e-12)
        if small or cost == 0.0:
            converged = True

    J = jacobian(p)
    A = J.T @ J
    m, n = J.shape
    s2 = cost / max(m - n, 1)
    try:
        cov = np.linalg.inv(A) * s2
    except np.linalg.LinAlgError as exc:
        raise SingularFitError(str(exc)) from exc
    return LMResult(p, cov, cost, converged, it, trace)
