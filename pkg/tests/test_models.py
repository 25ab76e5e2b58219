import math

import numpy as np
import pytest

from amvlab import carnot as ca
from amvlab import models as mo
from amvlab.mmspace import InputError


def test_cone_distance_examples():
    plane = mo.FlatCone(2 * math.pi)
    assert plane.distance(np.array([1.0, 0.0]), np.array([1.0, math.pi])) == pytest.approx(2.0)
    cone = mo.FlatCone(math.pi / 2)
    assert cone.distance(np.array([0.0, 0.7]), np.array([0.9, 0.1])) == pytest.approx(0.9)
    d = cone.distance(np.array([1.0, 0.0]), np.array([1.0, 3 * math.pi / 8]))
    assert d == pytest.approx(math.sqrt(2 - 2 * math.cos(math.pi / 8)), rel=1e-12)


def test_cone_triangle_inequality_spot():
    cone = mo.FlatCone(2.2)
    rng = np.random.default_rng(3)
    pts = np.stack([rng.uniform(0, 2, 300), rng.uniform(0, 2.2, 300)], axis=1)
    a, b, c = pts[:100], pts[100:200], pts[200:]
    assert np.all(
        cone.distance(a, c) <= cone.distance(a, b) + cone.distance(b, c) + 1e-12
    )


def test_full_cone_is_plane():
    plane = mo.FlatCone(2 * math.pi)
    eu = mo.Euclidean(2)
    rng = np.random.default_rng(0)
    polar = np.stack([rng.uniform(0, 2, 2000), rng.uniform(0, 2 * math.pi, 2000)], axis=1)
    cart = np.stack([polar[:, 0] * np.cos(polar[:, 1]), polar[:, 0] * np.sin(polar[:, 1])], axis=1)
    d_cone = plane.distance(polar[:1000], polar[1000:])
    d_flat = eu.distance(cart[:1000], cart[1000:])
    assert np.max(np.abs(d_cone - d_flat)) < 1e-12
    # and theta_r is identically one (quadrature is exact off the apex)
    for rho in (0.5, 1.3):
        assert plane.theta_r(np.array([rho, 0.3]), 0.4) == pytest.approx(1.0, abs=1e-13)


def test_ball_volumes():
    eu = mo.Euclidean(2)
    v, tag = eu.ball_volume(np.zeros(2), 1.0)
    assert v == pytest.approx(math.pi) and tag == "exact"
    cone = mo.FlatCone(1.1)
    v, tag = cone.ball_volume(np.array([0.0, 0.0]), 0.7)
    assert v == pytest.approx(0.5 * 1.1 * 0.49) and tag == "exact"
    # free disk away from the apex
    v, _ = mo.FlatCone(math.pi).ball_volume(np.array([1.0, 0.2]), 0.3)
    assert v == pytest.approx(math.pi * 0.09, rel=1e-13)


def test_cone_wrap_volume_against_mc():
    cone = mo.FlatCone(math.pi / 2)
    x = np.array([1.0, 0.3])
    r = 0.9
    v, _ = cone.ball_volume(x, r)
    rng = np.random.default_rng(5)
    n = 200_000
    rho = np.sqrt(rng.uniform(0, 1.9**2, n))
    phi = rng.uniform(0, math.pi / 2, n)
    hits = cone.distance(np.stack([rho, phi], axis=1), x[None, :]) < r
    area = (math.pi / 2) * 0.5 * 1.9**2
    mc = area * hits.mean()
    sigma = area * math.sqrt(hits.mean() * (1 - hits.mean()) / n)
    assert abs(v - mc) < 3 * sigma


def test_cone_apex_ratio_constant():
    cone = mo.FlatCone(2.0)
    ratios = [cone.ball_volume(np.zeros(2), r)[0] / (math.pi * r * r) for r in (0.1, 0.5, 2.0)]
    np.testing.assert_allclose(ratios, 2.0 / (2 * math.pi), rtol=1e-14)


def test_half_space():
    hs = mo.HalfSpace(2)
    assert hs.theta_r(np.array([0.0, 3.0]), 1.0) == pytest.approx(0.5)
    assert hs.theta_r(np.array([2.0, 0.0]), 1.0) == 1.0
    v, tag = hs.ball_volume(np.array([0.5, 0.0]), 1.0)
    # area = pi - segment cut at distance 0.5
    seg = math.acos(0.5) - 0.5 * math.sqrt(0.75)
    assert v == pytest.approx(math.pi - seg, rel=1e-12) and tag == "exact"
    with pytest.raises(InputError):
        hs.theta_r(np.array([-0.1, 0.0]), 1.0)


def test_half_space_sampler_stays_inside():
    hs = mo.HalfSpace(3)
    rng = np.random.default_rng(7)
    pts = hs.sample_ball(np.array([0.2, 0.0, 0.0]), 1.0, 5000, rng)
    assert np.all(pts[:, 0] >= 0.0)
    assert np.all(np.sum((pts - np.array([0.2, 0.0, 0.0])) ** 2, axis=1) < 1.0)


def test_cone_sampler_uniform():
    cone = mo.FlatCone(math.pi)
    rng = np.random.default_rng(11)
    x = np.array([0.8, 1.2])
    r = 0.5
    pts = cone.sample_ball(x, r, 40_000, rng)
    d = cone.distance(pts, x[None, :])
    assert np.all(d < r)
    # fraction inside half the radius tends to area ratio
    vol_half, _ = cone.ball_volume(x, r / 2)
    vol_full, _ = cone.ball_volume(x, r)
    frac = (d < r / 2).mean()
    assert abs(frac - vol_half / vol_full) < 3 * math.sqrt(0.25 / 40_000) + 0.005


def test_theta_r_not_defined_on_carnot():
    cs = mo.CarnotSpace(ca.heisenberg(1), ca.Gauge("koranyi"))
    with pytest.raises(InputError):
        cs.theta_r(np.zeros(3), 1.0)


def test_carnot_ball_volume_exact_scaling():
    cs = mo.CarnotSpace(ca.heisenberg(1), ca.Gauge("koranyi"))
    v1, tag = cs.ball_volume(np.array([3.0, -1.0, 0.4]), 1.0)
    assert tag == "exact"
    assert v1 == pytest.approx(math.pi**2 / 2, rel=1e-10)
    v2, _ = cs.ball_volume(np.zeros(3), 2.0)
    assert v2 == pytest.approx(v1 * 16.0, rel=1e-12)


def test_v_kn():
    assert mo.v_kn(0.0, 3, 2.0) == pytest.approx((4 * math.pi / 3) * 8, rel=1e-15)
    assert mo.v_kn(0.0, 2.5, 1.0) == pytest.approx(mo.unit_ball_volume(2.5), rel=1e-12)
    # flat small-radius expansion: deviation is O(r^(N+2))
    for K in (2.0, -2.0):
        dev = abs(mo.v_kn(K, 3, 0.01) - mo.unit_ball_volume(3) * 0.01**3)
        assert dev < 10.0 * 0.01**5
    with pytest.raises(InputError):
        mo.v_kn(2.0, 3, 10.0)  # beyond the model diameter
    with pytest.raises(InputError):
        mo.v_kn(1.0, 1, 0.5)  # K > 0 needs N > 1
    assert mo.v_kn(1.0, 3, 0.0) == 0.0


def test_bishop_gromov_ratio_flat_constant():
    eu = mo.Euclidean(2)
    vals = [mo.bishop_gromov_ratio(eu, np.zeros(2), r) for r in (0.2, 1.0, 3.7)]
    np.testing.assert_allclose(vals, 1.0, rtol=1e-14)


def test_mm_boundary_masses():
    eu = mo.Euclidean(2)
    assert mo.mm_boundary_mass(eu, mo.Region.ball([0, 0], 1.0), 0.3) == 0.0
    hs = mo.HalfSpace(2)
    kappa = 2.0 / (3.0 * math.pi)
    box = mo.Region.box([0.0, 0.0], [1.0, 1.0])
    for r in (0.5, 0.1):
        assert mo.mm_boundary_mass(hs, box, r) == pytest.approx(kappa, rel=1e-10)
    ball = mo.Region.ball([0.0, 0.0], 1.0)
    val = mo.mm_boundary_mass(hs, ball, 0.05)
    assert val == pytest.approx(2 * kappa, rel=2e-2)
    cone = mo.FlatCone(math.pi)
    m1 = mo.mm_boundary_mass(cone, mo.Region.ball([0.0, 0.0], 1.0), 0.2)
    m2 = mo.mm_boundary_mass(cone, mo.Region.ball([0.0, 0.0], 1.0), 0.02)
    assert m2 == pytest.approx(0.1 * m1, rel=1e-6)


def test_parse_space():
    assert isinstance(mo.parse_space("euclidean:3"), mo.Euclidean)
    assert isinstance(mo.parse_space("half:2"), mo.HalfSpace)
    assert isinstance(mo.parse_space("cone:3.14"), mo.FlatCone)
    cs = mo.parse_space("carnot:heisenberg:2:scaled:16")
    assert isinstance(cs, mo.CarnotSpace) and cs.group.v1 == 4 and cs.gauge.beta == 16.0
    for bad in ("euclidean", "cone:7.0", "carnot:foo:1:koranyi", "nope:1"):
        with pytest.raises(InputError):
            mo.parse_space(bad)


def test_parse_region():
    r = mo.parse_region("ball:0.5,0.5:2.0")
    assert r.kind == "ball" and r.radius == 2.0
    b = mo.parse_region("box:0,0:1,2")
    assert b.kind == "box" and b.hi.tolist() == [1.0, 2.0]
    assert mo.parse_region("unit").kind == "unit"
    with pytest.raises(InputError):
        mo.parse_region("triangle:1")


def test_clouds_have_exact_masses_and_margins():
    eu = mo.Euclidean(2)
    cloud, pts, meta = mo.euclidean_cloud(eu, [-1.0, -1.0], [1.0, 1.0], 16, seed=4)
    assert cloud.n == 256
    assert cloud.total_mass() == pytest.approx(4.0, rel=1e-12)
    assert np.all(meta.boundary_distance(pts) >= 0.0)
    cone = mo.FlatCone(2.0)
    ccloud, cpts, cmeta = mo.cone_cloud(cone, 1.0, 10, 20, seed=5)
    assert ccloud.total_mass() == pytest.approx(0.5 * 2.0 * 1.0**2, rel=1e-12)
    hs = mo.HalfSpace(2)
    hcloud, hpts, hmeta = mo.half_space_cloud(hs, [1.0, 1.0], [8, 8], seed=6, lo=[0.0, -1.0])
    assert np.all(hpts[:, 0] >= 0)
    # only lateral/top faces count as artificial boundary
    low_point = np.array([[0.01, 0.0]])
    assert hmeta.boundary_distance(low_point)[0] == pytest.approx(0.99)
