import io

import numpy as np
import pytest

from amvlab import mmspace as mm


@pytest.fixture
def two_point():
    return mm.FiniteMMSpace(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 2.0]))


@pytest.fixture
def line3():
    dist = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    return mm.FiniteMMSpace(dist, np.ones(3))


def test_ball_members_and_mass(line3):
    members, mass = mm.ball(line3, 1, 1.5)
    assert members.tolist() == [0, 1, 2] and mass == 3.0
    members, mass = mm.ball(line3, 0, 0.5)
    assert members.tolist() == [0] and mass == 1.0


def test_ball_two_point_weighted(two_point):
    members, mass = mm.ball(two_point, 0, 2.0)
    assert members.tolist() == [0, 1] and mass == 3.0


def test_ball_unknown_point(line3):
    with pytest.raises(mm.InputError):
        mm.ball(line3, "nope", 1.0)
    with pytest.raises(mm.InputError):
        mm.ball(line3, 0, -1.0)


def test_average(two_point, line3):
    assert mm.average(two_point, [0.0, 3.0], 2.0).tolist() == [2.0, 2.0]
    np.testing.assert_allclose(
        mm.average(line3, [1.0, 0.0, 0.0], 1.5), [0.5, 1 / 3, 0.0], rtol=1e-15
    )
    c = np.full(3, 4.2)
    np.testing.assert_array_equal(mm.average(line3, c, 0.7), c)


def test_adjoint_average(two_point, line3):
    np.testing.assert_allclose(mm.adjoint_average(two_point, [0.0, 3.0], 2.0), [2.0, 2.0])
    np.testing.assert_allclose(mm.a_r(line3, 1.5), [5 / 6, 4 / 3, 5 / 6], rtol=1e-15)
    # singleton balls: adjoint average reduces to the identity
    u = np.array([1.3, -0.4, 2.2])
    np.testing.assert_allclose(mm.adjoint_average(line3, u, 0.5), u, rtol=1e-15)


def test_r_laplacian(two_point, line3):
    np.testing.assert_allclose(mm.r_laplacian(two_point, [0.0, 3.0], 2.0), [0.5, -0.25])
    np.testing.assert_array_equal(mm.r_laplacian(line3, np.full(3, 7.0), 1.5), np.zeros(3))
    np.testing.assert_allclose(
        mm.r_laplacian(line3, [1.0, 0.0, 0.0], 1.5)[0], -2 / 9, rtol=1e-14
    )


def test_adjoint_r_laplacian(two_point, line3):
    np.testing.assert_allclose(mm.adjoint_r_laplacian(two_point, [0.0, 3.0], 2.0), [0.5, -0.25])
    np.testing.assert_allclose(
        mm.adjoint_r_laplacian(line3, np.ones(3), 1.5), [-2 / 27, 4 / 27, -2 / 27], rtol=1e-14
    )
    u = np.array([1.3, -0.4, 2.2])
    np.testing.assert_allclose(mm.adjoint_r_laplacian(line3, u, 0.5), np.zeros(3), atol=1e-14)


def test_sym_r_laplacian(two_point, line3):
    np.testing.assert_allclose(mm.sym_r_laplacian(two_point, [0.0, 3.0], 2.0), [0.5, -0.25])
    np.testing.assert_array_equal(mm.sym_r_laplacian(line3, np.full(3, -2.0), 1.5), np.zeros(3))
    # kernel evaluation at the left endpoint: k(l, mid) = (1/2)(1/2 + 1/3),
    # one neighbor with mass 1 and value drop -1, all over r^2
    expected = 0.5 * (1 / 2 + 1 / 3) * (-1.0) / 1.5**2
    np.testing.assert_allclose(mm.sym_r_laplacian(line3, [1.0, 0.0, 0.0], 1.5)[0], expected)


def test_delta_r(two_point, line3):
    assert mm.delta_r(line3, 0, 1, 1.5) == pytest.approx(1 / 3, rel=1e-15)
    assert mm.delta_r(line3, 1, 1, 1.5) == 0.0
    assert mm.delta_r(two_point, 0, 1, 2.0) == 0.0
    assert mm.delta_r(two_point, 1, 0, 2.0) == 0.0


def test_energy_density(two_point):
    u = np.array([0.0, 3.0])
    np.testing.assert_allclose(mm.energy_density(two_point, u, u, 2.0), [0.75, 0.375])
    np.testing.assert_array_equal(
        mm.energy_density(two_point, np.full(2, 5.0), u, 2.0), np.zeros(2)
    )
    v = np.array([0.0, -1.0])
    np.testing.assert_allclose(mm.energy_density(two_point, u, v, 2.0), [-0.25, -0.125])


def test_total_energy(two_point):
    u = np.array([0.0, 3.0])
    assert mm.total_energy(two_point, u, u, 2.0) == pytest.approx(1.5, rel=1e-15)
    assert mm.total_energy(two_point, u, np.full(2, 9.0), 2.0) == 0.0
    # pairing route: E(u,u) = -sum u * sym(u) * mass
    sym = mm.sym_r_laplacian(two_point, u, 2.0)
    assert -float(np.sum(u * sym * two_point.mass)) == pytest.approx(1.5, rel=1e-14)


def test_weak_pairing(two_point):
    u = np.array([0.0, 3.0])
    assert mm.weak_pairing(two_point, [1.0, 1.0], u, 2.0) == pytest.approx(0.0, abs=1e-15)
    assert mm.weak_pairing(two_point, [0.0, 0.0], u, 2.0) == 0.0
    assert mm.weak_pairing(two_point, [1.0, 0.0], u, 2.0) == pytest.approx(0.5)


def test_kernel_symmetry_and_support(line3):
    k = mm.kernel_matrix(line3, 1.5)
    np.testing.assert_array_equal(k, k.T)
    assert np.all(k[line3.dist >= 1.5] == 0.0)
    assert np.all(k[line3.dist < 1.5] > 0.0)


def test_monotone_ball_growth():
    rng = np.random.default_rng(12)
    space = mm.random_space(rng, 25)
    radii = np.sort(rng.uniform(0.05, 3.0, size=12))
    masses = np.stack([mm.ball_masses(space, r) for r in radii])
    assert np.all(np.diff(masses, axis=0) >= 0)


def test_identity_suite_random_instances():
    summary = mm.run_identity_suite(60, 40, seed=123)
    assert summary["ok"], summary["worst"]
    assert max(summary["worst"].values()) < 1e-12


def test_identity_suite_fault_injection_trips():
    summary = mm.run_identity_suite(5, 15, seed=1, fault_inject=True)
    assert not summary["ok"]
    assert "offender" in summary


def test_identity_suite_empty():
    summary = mm.run_identity_suite(0, 10, seed=0)
    assert summary["ok"] and summary["worst"] == {}


def test_collision_radius_flagging(line3):
    assert mm.is_collision_radius(line3, 1.0)
    assert not mm.is_collision_radius(line3, 1.1)


def test_validation_errors():
    with pytest.raises(mm.InputError):
        mm.FiniteMMSpace(np.array([[0.0, 1.0], [2.0, 0.0]]), np.ones(2))  # asymmetric
    with pytest.raises(mm.InputError):
        mm.FiniteMMSpace(np.zeros((2, 2)), np.array([1.0, 0.0]))  # nonpositive mass
    with pytest.raises(mm.InputError):
        mm.FiniteMMSpace(np.array([[0.1, 0.0], [0.0, 0.1]]), np.ones(2))  # diagonal
    sp = mm.FiniteMMSpace(np.zeros((1, 1)), np.ones(1))
    with pytest.raises(mm.InputError):
        mm.as_field(sp, [1.0, 2.0])


def test_serialization_roundtrip_exact():
    rng = np.random.default_rng(5)
    space = mm.random_space(rng, 17)
    text = mm.space_to_text(space)
    back = mm.space_from_text(text)
    assert np.array_equal(space.dist, back.dist)
    assert np.array_equal(space.mass, back.mass)


def test_serialization_grammar():
    text = "# comment\n3\n1.0\n2.0 1.0\n\n1.0 1.0 1.0\n"
    sp = mm.space_from_text(text)
    assert sp.n == 3 and sp.dist[2, 0] == 2.0 and sp.dist[0, 2] == 2.0
    with pytest.raises(mm.InputError):
        mm.space_from_text("2\n1.0\n")  # missing mass line
    with pytest.raises(mm.InputError):
        mm.space_from_text("2\n1.0 3.0\n1 1\n")  # too many row entries


def test_field_serialization_roundtrip():
    vals = np.array([0.1, -2.5, 3.0000000001])
    buf = io.StringIO()
    mm.save_field(vals, buf)
    back = mm.load_field(io.StringIO(buf.getvalue()))
    assert np.array_equal(vals, back)
