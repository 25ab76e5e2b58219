import numpy as np
import pytest

from amvlab.fields import (
    Callable1,
    ConeTent,
    Constant,
    GaugePower,
    Monomial,
    ShiftedSquareNorm,
    Tent,
    coordinate,
    harmonic_cubic,
)


def fd_gradient(field, pts, h=1e-6):
    grad = np.zeros_like(pts)
    for i in range(pts.shape[-1]):
        e = np.zeros(pts.shape[-1])
        e[i] = h
        grad[..., i] = (field.value(pts + e) - field.value(pts - e)) / (2 * h)
    return grad


def fd_hessian(field, pts, h=1e-5):
    d = pts.shape[-1]
    hess = np.zeros(pts.shape[:-1] + (d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        hess[..., i, :] = (field.gradient(pts + e) - field.gradient(pts - e)) / (2 * h)
    return hess


CATALOG = [
    Constant(3, 2.5),
    Monomial(3, (2, 0, 0)),
    Monomial(3, (1, 2, 1), coeff=-0.7),
    Monomial(3, (4, 0, 0), coeff=0.3),
    coordinate(3, 2),
    ShiftedSquareNorm(3, 0, 2, center=[0.4, -0.2]),
    GaugePower(3, 2, 1.0, 1.0),
    GaugePower(3, 2, 16.0, -2.0),
    GaugePower(3, 2, 16.0, 3.0),
    harmonic_cubic(3),
    harmonic_cubic(3) * 0.5 + Monomial(3, (0, 0, 2)) - 1.25,
]


@pytest.mark.parametrize("field", CATALOG, ids=lambda f: type(f).__name__ + repr(id(f))[-3:])
def test_gradient_matches_finite_differences(field):
    rng = np.random.default_rng(42)
    pts = rng.uniform(0.3, 1.4, size=(12, 3))
    grad = field.gradient(pts)
    fd = fd_gradient(field, pts)
    scale = np.maximum(np.abs(fd), 1.0)
    assert np.max(np.abs(grad - fd) / scale) < 1e-6


@pytest.mark.parametrize("field", CATALOG, ids=lambda f: type(f).__name__ + repr(id(f))[-3:])
def test_hessian_matches_finite_differences(field):
    rng = np.random.default_rng(43)
    pts = rng.uniform(0.3, 1.4, size=(8, 3))
    hess = field.hessian(pts)
    fd = fd_hessian(field, pts)
    scale = np.maximum(np.abs(fd), 1.0)
    assert np.max(np.abs(hess - fd) / scale) < 1e-6


def test_monomial_values():
    f = Monomial(2, (3, 1), coeff=2.0)
    assert f.value(np.array([[2.0, 5.0]]))[0] == 80.0
    g = f.gradient(np.array([[2.0, 5.0]]))[0]
    assert g.tolist() == [120.0, 16.0]


def test_field_algebra():
    f = Monomial(2, (2, 0)) * 3.0 + Monomial(2, (0, 2)) * (-1.0) + 4.0
    pts = np.array([[1.0, 2.0]])
    assert f.value(pts)[0] == 3.0 - 4.0 + 4.0
    h = f.hessian(pts)[0]
    assert h[0, 0] == 6.0 and h[1, 1] == -2.0 and h[0, 1] == 0.0


def test_harmonic_cubic_is_harmonic():
    f = harmonic_cubic(2)
    pts = np.random.default_rng(1).uniform(-2, 2, size=(20, 2))
    tr = np.trace(f.hessian(pts), axis1=-2, axis2=-1)
    np.testing.assert_allclose(tr, 0.0, atol=1e-12)


def test_gauge_power_homogeneity():
    rho = GaugePower(3, 2, 1.0, 1.0)
    pts = np.random.default_rng(2).uniform(-1, 1, size=(30, 3))
    t = 1.7
    dil = np.column_stack([t * pts[:, :2], t * t * pts[:, 2]])
    np.testing.assert_allclose(rho.value(dil), t * rho.value(pts), rtol=1e-13)


def test_tent_values_and_support():
    tent = Tent(2, [0.0, 0.0], 0.5, 1.0)
    pts = np.array([[0.1, 0.0], [0.7, 0.0], [1.5, 0.0]])
    np.testing.assert_allclose(tent.value(pts), [1.0, 0.6, 0.0])
    cone_tent = ConeTent(0.2, 0.4)
    np.testing.assert_allclose(
        cone_tent.value(np.array([[0.1, 1.0], [0.3, 2.0], [0.5, 0.0]])), [1.0, 0.5, 0.0]
    )
    with pytest.raises(NotImplementedError):
        tent_grad = getattr(tent, "gradient", None)
        if tent_grad is None:
            raise NotImplementedError
        tent_grad(pts)


def test_callable_wrapper():
    f = Callable1(2, lambda p: p[..., 0] + 2 * p[..., 1])
    assert f.value(np.array([[1.0, 2.0]]))[0] == 5.0
    with pytest.raises(ValueError):
        f.value(np.zeros((3, 3)))
