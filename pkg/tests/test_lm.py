import numpy as np
import pytest
from scipy.optimize import least_squares

from nfcavity.lm import SingularFitError, levenberg_marquardt


def rosenbrock():
    def res(p):
        return np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]])

    def jac(p):
        return np.array([[-20 * p[0], 10.0], [-1.0, 0.0]])

    return res, jac


def test_rosenbrock_minimum():
    res, jac = rosenbrock()
    out = levenberg_marquardt(res, jac, [-1.2, 1.0])
    assert out.converged
    assert np.allclose(out.params, [1, 1], atol=1e-8)
    assert np.all(np.diff(out.trace) < 0)


def test_exponential_matches_scipy():
    rng = np.random.default_rng(0)
    t = np.linspace(0, 4, 50)
    y = 2.5 * np.exp(-1.3 * t) + 0.4 + 0.02 * rng.standard_normal(t.size)

    def res(p):
        return p[0] * np.exp(-p[1] * t) + p[2] - y

    def jac(p):
        e = np.exp(-p[1] * t)
        return np.column_stack([e, -p[0] * t * e, np.ones_like(t)])

    ours = levenberg_marquardt(res, jac, [1.0, 1.0, 0.0])
    ref = least_squares(res, [1.0, 1.0, 0.0], jac=jac, method="lm", xtol=1e-15, ftol=1e-15)
    assert np.allclose(ours.params, ref.x, rtol=1e-7)
    assert ours.cost == pytest.approx(2 * ref.cost, rel=1e-10)


def test_iteration_cap_reports_not_converged():
    res, jac = rosenbrock()
    out = levenberg_marquardt(res, jac, [-1.2, 1.0], max_iter=2)
    assert not out.converged and out.n_iter == 2


def test_dead_parameter_is_singular():
    x = np.linspace(0, 1, 10)
    with pytest.raises(SingularFitError):
        levenberg_marquardt(lambda p: p[0] * x - x, lambda p: np.column_stack([x, 0 * x]), [0.5, 1.0])


def test_deterministic():
    res, jac = rosenbrock()
    a = levenberg_marquardt(res, jac, [-1.2, 1.0])
    b = levenberg_marquardt(res, jac, [-1.2, 1.0])
    assert np.array_equal(a.params, b.params) and a.trace == b.trace
