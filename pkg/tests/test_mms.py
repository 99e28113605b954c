import numpy as np
import pytest

from stokesmpe.assembly import ParameterSet, Sources
from stokesmpe.mms import ExactSolution, interface_residuals, random_interior_points, verify_sources_fd

PI = np.pi


@pytest.fixture(scope="module")
def ex():
    return ExactSolution()


def test_frequency(ex):
    assert ex.eta == pytest.approx(2.0)


def test_point_values(ex):
    np.testing.assert_allclose(ex.d(0.0, [[-0.25, 0.25]]), [[-PI / 2, PI / 2]], rtol=1e-14)
    assert ex.p_E(0.0, [[0.0, 0.5]])[0] == pytest.approx(-2 * PI ** 2, rel=1e-14)
    # the spatial factor vanishes on x + y = 1/2 and equals one at the corner (0.5, 0.5)
    np.testing.assert_allclose(ex.u(0.0, [[0.25, 0.25]]), [[0.0, 0.0]], atol=1e-14)
    np.testing.assert_allclose(ex.u(0.0, [[0.5, 0.5]]), [[-2 * PI, 2 * PI]], rtol=1e-14)


def test_divergence_free(ex):
    x = random_interior_points(200, np.random.default_rng(0))
    for t in (0.0, 3e-7, 1.3):
        g = ex.grad_u(t, x)
        assert np.abs(g[:, 0, 0] + g[:, 1, 1]).max() <= 1e-10
        g = ex.grad_d(t, x)
        assert np.abs(g[:, 0, 0] + g[:, 1, 1]).max() <= 1e-10


@pytest.mark.parametrize("name", ["d", "u", "p_E", "p"])
def test_gradients_match_differences(ex, name):
    f, g = getattr(ex, name), getattr(ex, "grad_" + name)
    x = random_interior_points(20, np.random.default_rng(1))
    h = 1e-6
    fd = np.stack([(f(0.2, x + [h, 0]) - f(0.2, x - [h, 0])) / (2 * h),
                   (f(0.2, x + [0, h]) - f(0.2, x - [0, h])) / (2 * h)], axis=-1)
    np.testing.assert_allclose(fd, g(0.2, x).reshape(fd.shape), atol=1e-6 * max(1, np.abs(fd).max()))


def test_time_derivatives(ex):
    x = random_interior_points(10, np.random.default_rng(2))
    h = 1e-6
    np.testing.assert_allclose((ex.d(0.3 + h, x) - ex.d(0.3 - h, x)) / (2 * h), ex.d_t(0.3, x), rtol=1e-7)
    np.testing.assert_allclose((ex.p_E(0.3 + h, x) - ex.p_E(0.3 - h, x)) / (2 * h), ex.p_E_t(0.3, x), rtol=1e-7)


@pytest.mark.parametrize("t", [0.0, 2e-7, 0.7])
def test_source_oracle(ex, t):
    x = random_interior_points(100, np.random.default_rng(42))
    r = verify_sources_fd(ex, t, x)
    for k in ("el", "J", "f"):
        assert np.max(r[k] / r["scale_" + k]) <= 1e-5
    assert np.max(r["div"]) <= 1e-10


def test_g_at_reference_point(ex):
    r = verify_sources_fd(ex, 0.0, [[-0.25, 0.25]])
    assert r["J"][0] / abs(ex.g_E(0.0, [[-0.25, 0.25]])[0]) <= 1e-5


def test_corrupted_source_detected(ex):
    bad = Sources(ex.f_el, ex.g, lambda t, x: ex.f_f(t, x) + np.array([1.0, 0.0]))
    r = verify_sources_fd(ex, 0.0, random_interior_points(10, np.random.default_rng(3)), sources=bad)
    np.testing.assert_allclose(r["f"], 1.0, atol=1e-5)


def test_general_parameters_oracle():
    prm = ParameterSet(mu_el=2.0, lam=3.0, mu_f=0.5, alpha=(0.25,), c=(0.7,), kappa=(1.5,),
                       mu_net=(2.0,), beta_e=(0.3,), beta=((0.0,),))
    ex = ExactSolution(prm)
    r = verify_sources_fd(ex, 0.1, random_interior_points(50, np.random.default_rng(8)))
    for k in ("el", "J", "f"):
        assert np.max(r[k] / r["scale_" + k]) <= 1e-5


def test_interface_conditions(ex):
    y = np.linspace(0.0, 0.5, 21)
    for t in (0.0, 4e-7, 0.9):
        res = interface_residuals(ex, t, y)
        assert max(res.values()) < 1e-12


def test_multinetwork_rejected():
    with pytest.raises(ValueError):
        ExactSolution(ParameterSet.unit(n_networks=2))
