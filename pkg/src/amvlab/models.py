"""Continuum model spaces: Euclidean space, half-space, flat cones, Carnot.

Each space knows its point representation, distance, reference measure,
ball volumes (exact where available, quadrature otherwise) and a uniform
ball sampler driven by an explicit RNG.  The half-space convention puts the
boundary at {x[0] = 0}, so the first coordinate is the distance to the
boundary.

Volume densities theta_r = vol(B_r(x)) / (omega_N r^N) use the topological
dimension N; they are offered for the Euclidean, half-space and cone kinds
only (there is no canonical normalization on a Carnot group, where the
request raises).
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy import integrate as _sciint
from scipy import special as _special

from . import _kernels
from .carnot import CarnotStep2, Gauge, distance_matrix, heisenberg
from .mmspace import FiniteMMSpace, InputError


logger = logging.getLogger("amvlab.models")


class NumericError(RuntimeError):
    """A numeric procedure failed to reach its stated accuracy."""


def unit_ball_volume(n: float) -> float:
    """Lebesgue volume of the unit ball in R^n; n may be non-integer."""
    n = float(n)
    if n < 0:
        raise InputError("dimension must be nonnegative")
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _check_r(r) -> float:
    r = float(r)
    if not (r > 0) or not math.isfinite(r):
        raise InputError(f"radius must be positive and finite, got {r}")
    return r


def _symmetrized(d: np.ndarray) -> np.ndarray:
    """Mirror the strict lower triangle of a self-distance matrix.

    The fused Carnot kernel can disagree across the diagonal by one ulp
    (the bracket sum order transposes); finite spaces require exact
    symmetry.
    """
    lower = np.tril(d, -1)
    return lower + lower.T


class ModelSpace:
    kind = "abstract"
    dim: int  # topological dimension

    def distance(self, p, q):
        raise NotImplementedError

    def distance_matrix(self, pts_a, pts_b=None, threads: int = 1) -> np.ndarray:
        raise NotImplementedError

    def ball_volume(self, x, r):
        """Measure of B_r(x); returns (value, method_tag)."""
        raise NotImplementedError

    def theta_r(self, x, r) -> float:
        raise InputError(f"theta_r is not defined for the {self.kind} kind")

    def sample_ball(self, x, r, n, rng, threads: int = 1) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> str:
        raise NotImplementedError


class Euclidean(ModelSpace):
    kind = "euclidean"

    def __init__(self, n: int):
        n = int(n)
        if n < 1:
            raise InputError("dimension must be >= 1")
        self.dim = n

    def spec(self) -> str:
        return f"euclidean:{self.dim}"

    def _pts(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        if p.shape[-1] != self.dim:
            raise InputError(f"points must have last axis {self.dim}")
        return p

    def distance(self, p, q):
        p, q = self._pts(p), self._pts(q)
        return np.sqrt(np.sum((p - q) ** 2, axis=-1))

    def distance_matrix(self, pts_a, pts_b=None, threads: int = 1) -> np.ndarray:
        pts_a = np.atleast_2d(self._pts(pts_a))
        if pts_b is None:
            return _symmetrized(_kernels.euclid_dist_matrix(pts_a, pts_a, threads))
        return _kernels.euclid_dist_matrix(pts_a, np.atleast_2d(self._pts(pts_b)), threads)

    def ball_volume(self, x, r):
        r = _check_r(r)
        return unit_ball_volume(self.dim) * r**self.dim, "exact"

    def theta_r(self, x, r) -> float:
        _check_r(r)
        return 1.0

    def sample_ball(self, x, r, n, rng, threads: int = 1) -> np.ndarray:
        r = _check_r(r)
        x = self._pts(x)
        return x + ball_point_cloud(self.dim, r, n, rng)


def ball_point_cloud(dim: int, r: float, n: int, rng) -> np.ndarray:
    """n points uniform in the centered Euclidean r-ball (polar method)."""
    g = rng.standard_normal((n, dim))
    norms = np.sqrt(np.sum(g * g, axis=1))
    norms[norms == 0] = 1.0
    radii = r * rng.random(n) ** (1.0 / dim)
    return g * (radii / norms)[:, None]


def _halfspace_deficit(s, n: int):
    """Fraction of the unit n-ball with first coordinate above s in [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return 0.5 * _special.betainc((n + 1) / 2.0, 0.5, 1.0 - s * s)


class HalfSpace(ModelSpace):
    kind = "half_space"

    def __init__(self, n: int):
        n = int(n)
        if n < 1:
            raise InputError("dimension must be >= 1")
        self.dim = n

    def spec(self) -> str:
        return f"half:{self.dim}"

    def _pts(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        if p.shape[-1] != self.dim:
            raise InputError(f"points must have last axis {self.dim}")
        if np.any(p[..., 0] < 0):
            raise InputError("half-space points need a nonnegative first coordinate")
        return p

    def distance(self, p, q):
        return np.sqrt(np.sum((self._pts(p) - self._pts(q)) ** 2, axis=-1))

    def distance_matrix(self, pts_a, pts_b=None, threads: int = 1) -> np.ndarray:
        pts_a = np.atleast_2d(self._pts(pts_a))
        if pts_b is None:
            return _symmetrized(_kernels.euclid_dist_matrix(pts_a, pts_a, threads))
        return _kernels.euclid_dist_matrix(pts_a, np.atleast_2d(self._pts(pts_b)), threads)

    def ball_volume(self, x, r):
        r = _check_r(r)
        h = float(self._pts(x)[..., 0])
        full = unit_ball_volume(self.dim) * r**self.dim
        if h >= r:
            return full, "exact"
        return full * (1.0 - float(_halfspace_deficit(h / r, self.dim))), "exact"

    def theta_r(self, x, r) -> float:
        vol, _ = self.ball_volume(x, r)
        return vol / (unit_ball_volume(self.dim) * float(r) ** self.dim)

    def sample_ball(self, x, r, n, rng, threads: int = 1) -> np.ndarray:
        """Rejection from the full Euclidean ball (kept fraction >= 1/2)."""
        r = _check_r(r)
        x = self._pts(x)
        out = np.empty((n, self.dim))
        got = 0
        while got < n:
            need = n - got
            batch = x + ball_point_cloud(self.dim, r, max(2 * need, 64), rng)
            keep = batch[batch[:, 0] >= 0.0]
            take = min(need, keep.shape[0])
            out[got : got + take] = keep[:take]
            got += take
        return out


class FlatCone(ModelSpace):
    """2-D cone of total apex angle theta_c in (0, 2*pi].

    Points are (rho, phi) with rho >= 0 and phi in [0, theta_c); rho = 0 is
    the apex regardless of phi.  theta_c = 2*pi is the flat plane in polar
    coordinates.
    """

    kind = "flat_cone"
    dim = 2

    def __init__(self, theta_c: float):
        theta_c = float(theta_c)
        if not (0 < theta_c <= 2 * math.pi):
            raise InputError("total angle must lie in (0, 2*pi]")
        self.theta_c = theta_c

    def spec(self) -> str:
        return f"cone:{self.theta_c!r}"

    def _pts(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        if p.shape[-1] != 2:
            raise InputError("cone points are (rho, phi) pairs")
        if np.any(p[..., 0] < 0):
            raise InputError("cone radius must be nonnegative")
        return p

    def distance(self, p, q):
        p, q = self._pts(p), self._pts(q)
        dphi = np.abs(p[..., 1] - q[..., 1])
        delta = np.minimum(dphi, self.theta_c - dphi)
        law = np.sqrt(
            np.maximum(
                p[..., 0] ** 2 + q[..., 0] ** 2 - 2.0 * p[..., 0] * q[..., 0] * np.cos(delta), 0.0
            )
        )
        return np.where(delta <= math.pi, law, p[..., 0] + q[..., 0])

    def distance_matrix(self, pts_a, pts_b=None, threads: int = 1) -> np.ndarray:
        pts_a = np.atleast_2d(self._pts(pts_a))
        if pts_b is None:
            out = _kernels.cone_dist_matrix(
                pts_a[:, 0], pts_a[:, 1], pts_a[:, 0], pts_a[:, 1], self.theta_c, threads
            )
            return _symmetrized(out)
        pts_b = np.atleast_2d(self._pts(pts_b))
        return _kernels.cone_dist_matrix(
            pts_a[:, 0], pts_a[:, 1], pts_b[:, 0], pts_b[:, 1], self.theta_c, threads
        )

    def ball_volume(self, x, r):
        """Area of B_r(x) by angular quadrature over the unfolded slices.

        The area is 2 * int_0^(theta_c/2) L(delta) d(delta), where L is the
        radial measure of the slice at angular offset delta.  When the ball
        misses the apex (r < rho0) the substitution sin(delta) =
        (r/rho0) sin(psi) makes the integrand 2 r^2 cos^2(psi), which the
        rule integrates exactly; the apex-centered sector stays closed-form
        as a cross-check.
        """
        r = _check_r(r)
        rho0 = float(self._pts(x)[..., 0])
        half = 0.5 * self.theta_c
        if rho0 == 0.0:
            return 0.5 * self.theta_c * r * r, "exact"
        if r < rho0:
            kink = math.asin(r / rho0)
            if half >= kink:
                psi_max = 0.5 * math.pi  # free disk, no wrap around the apex
            else:
                psi_max = math.asin(min(1.0, (rho0 / r) * math.sin(half)))
            nodes, weights = _gl_nodes(16, 0.0, psi_max)
            area = 2.0 * float(np.sum(weights * 2.0 * r * r * np.cos(nodes) ** 2))
            return area, "quadrature"
        # apex inside the ball: smooth slice profile, split at pi/2
        pieces = [p for p in (0.0, 0.5 * math.pi, half) if p <= half]
        if pieces[-1] != half:
            pieces.append(half)
        total = 0.0
        for a, b in zip(pieces[:-1], pieces[1:]):
            if b <= a:
                continue
            nodes, weights = _gl_nodes(96, a, b)
            disc = np.maximum(r * r - (rho0 * np.sin(nodes)) ** 2, 0.0)
            hi = np.maximum(rho0 * np.cos(nodes) + np.sqrt(disc), 0.0)
            total += float(np.sum(weights * 0.5 * hi * hi))
        return 2.0 * total, "quadrature"

    def theta_r(self, x, r) -> float:
        vol, _ = self.ball_volume(x, r)
        return vol / (math.pi * float(r) ** 2)

    def sample_ball(self, x, r, n, rng, threads: int = 1) -> np.ndarray:
        """Rejection from an annulus-sector envelope in (rho, phi)."""
        r = _check_r(r)
        x = self._pts(x)
        rho0, phi0 = float(x[..., 0]), float(x[..., 1])
        rho_lo, rho_hi = max(0.0, rho0 - r), rho0 + r
        if rho0 > r:
            c = 1.0 - r * r / (2.0 * rho0 * (rho0 - r))
            dmax = math.acos(max(-1.0, c)) if c < 1.0 else 0.0
            dmax = min(dmax, 0.5 * self.theta_c)
        else:
            dmax = 0.5 * self.theta_c
        out = np.empty((n, 2))
        got = 0
        while got < n:
            m = max(4 * (n - got), 256)
            rho = np.sqrt(rng.uniform(rho_lo * rho_lo, rho_hi * rho_hi, m))
            phi = np.mod(phi0 + rng.uniform(-dmax, dmax, m), self.theta_c)
            cand = np.stack([rho, phi], axis=1)
            keep = cand[self.distance(cand, x[None, :]) < r]
            take = min(n - got, keep.shape[0])
            out[got : got + take] = keep[:take]
            got += take
        return out


class CarnotSpace(ModelSpace):
    """A step-2 Carnot group with a gauge, as a metric measure space.

    The reference measure is the Haar = Lebesgue measure in exponential
    coordinates; the topological dimension is v1 + v2 while ball volume
    scales with the homogeneous dimension Q.
    """

    kind = "carnot"

    def __init__(self, group: CarnotStep2, gauge: Gauge, preset: str | None = None):
        self.group = group
        self.gauge = gauge
        self.dim = group.dim
        self._preset = preset
        self._unit_volume = None
        self._unit_volume_method = None

    def spec(self) -> str:
        name = self._preset if self._preset else "custom"
        return f"carnot:{name}:{self.gauge.spec()}"

    def distance(self, p, q):
        from .carnot import distance as _dist

        return _dist(self.group, self.gauge, p, q)

    def distance_matrix(self, pts_a, pts_b=None, threads: int = 1) -> np.ndarray:
        if pts_b is None:
            return _symmetrized(distance_matrix(self.group, self.gauge, pts_a, pts_a, threads))
        return distance_matrix(self.group, self.gauge, pts_a, pts_b, threads)

    def unit_ball_volume(self) -> tuple[float, str]:
        """Volume of B_1(0), computed once (quadrature when available)."""
        if self._unit_volume is None:
            from .integrate import carnot_ball_quadrature, GridUnavailable

            try:
                nodes, weights = carnot_ball_quadrature(self.group, self.gauge, 1.0, res=48)
                self._unit_volume = float(np.sum(weights))
                self._unit_volume_method = "quadrature"
            except GridUnavailable:
                from .integrate import SeedSpec, carnot_ball_volume_mc

                est = carnot_ball_volume_mc(self, np.zeros(self.dim), 1.0, 4_000_000, SeedSpec(20260809, 0))
                self._unit_volume = est.value
                self._unit_volume_method = "monte_carlo"
        return self._unit_volume, self._unit_volume_method

    def ball_volume(self, x, r):
        r = _check_r(r)
        c, method = self.unit_ball_volume()
        return c * r**self.group.homogeneous_dim, ("exact" if method == "quadrature" else method)

    def sample_ball(self, x, r, n, rng, threads: int = 1) -> np.ndarray:
        """Left-translate of box-rejection samples from B_r(0).

        The envelope is the exact gauge-ball bounding box; unbiasedness
        rests on Haar invariance of left translation.
        """
        r = _check_r(r)
        g = self.group
        x = g._check(np.asarray(x, dtype=np.float64))
        h_bound, v_bound = self.gauge.envelope(g, r)
        out = np.empty((n, g.dim))
        got = 0
        attempts = 0
        accepted = 0
        while got < n:
            m = max(2 * (n - got), 512)
            z = np.empty((m, g.dim))
            z[:, : g.v1] = ball_point_cloud(g.v1, h_bound, m, rng)
            if g.v2:
                z[:, g.v1 :] = rng.uniform(-v_bound, v_bound, (m, g.v2))
            vals = self.gauge.value(g, z, threads)
            keep = z[vals < r]
            attempts += m
            accepted += keep.shape[0]
            if attempts >= 20000 and accepted < 1e-3 * attempts:
                raise NumericError(
                    f"rejection acceptance rate {accepted / attempts:.2e} < 1e-3; "
                    "the gauge envelope looks misconfigured"
                )
            take = min(n - got, keep.shape[0])
            out[got : got + take] = keep[:take]
            got += take
        logger.debug("gauge-ball rejection acceptance rate %.4f", accepted / attempts)
        return self.group.multiply(x, out)


# ---------------------------------------------------------------------------
# space selection strings
# ---------------------------------------------------------------------------


def parse_space(spec: str) -> ModelSpace:
    """Parse CLI space strings: euclidean:n, half:n, cone:theta,
    carnot:heisenberg:n:gauge[:beta]."""
    tok = spec.strip().split(":")
    kind = tok[0].lower()
    try:
        if kind == "euclidean" and len(tok) == 2:
            return Euclidean(int(tok[1]))
        if kind == "half" and len(tok) == 2:
            return HalfSpace(int(tok[1]))
        if kind == "cone" and len(tok) == 2:
            return FlatCone(float(tok[1]))
        if kind == "carnot" and len(tok) >= 4:
            if tok[1].lower() != "heisenberg":
                raise InputError(f"unknown carnot preset {tok[1]!r}")
            group = heisenberg(int(tok[2]))
            gname = tok[3].lower()
            preset = f"heisenberg:{int(tok[2])}"
            if gname == "koranyi" and len(tok) == 4:
                return CarnotSpace(group, Gauge("koranyi"), preset)
            if gname in ("scaled", "scaled_koranyi") and len(tok) == 5:
                return CarnotSpace(group, Gauge("scaled_koranyi", float(tok[4])), preset)
            raise InputError(f"unknown gauge spec {':'.join(tok[3:])!r}")
    except (ValueError, IndexError) as exc:
        raise InputError(f"malformed space spec {spec!r}: {exc}") from None
    raise InputError(f"malformed space spec {spec!r}")


# ---------------------------------------------------------------------------
# Bishop-Gromov reference profile
# ---------------------------------------------------------------------------


def s_kn(K: float, N: float, t):
    """Model-space sine: sin / linear / sinh branches by the sign of K."""
    t = np.asarray(t, dtype=np.float64)
    if N < 1:
        raise InputError("N must be >= 1")
    if K == 0:
        return t.copy()
    if N == 1:
        raise InputError("K != 0 requires N > 1")
    if K > 0:
        a = math.sqrt(K / (N - 1))
        return np.sin(t * a) / a
    a = math.sqrt(-K / (N - 1))
    return np.sinh(t * a) / a


def v_kn(K: float, N: float, r: float) -> float:
    """Reference ball volume N*omega_N*int_0^r s_{K,N}^(N-1); exact for K=0."""
    r = float(r)
    if r < 0:
        raise InputError("radius must be nonnegative")
    if r == 0:
        return 0.0
    N = float(N)
    if N < 1:
        raise InputError("N must be >= 1")
    if K > 0:
        if N == 1:
            raise InputError("K > 0 requires N > 1")
        r_max = math.pi * math.sqrt((N - 1) / K)
        if r >= r_max:
            raise InputError(f"radius {r} outside the model domain (0, {r_max})")
    if K == 0:
        return unit_ball_volume(N) * r**N
    val, err = _sciint.quad(lambda t: s_kn(K, N, t) ** (N - 1.0), 0.0, r, limit=200)
    if err > 1e-9 * max(abs(val), 1.0):
        raise NumericError(f"volume profile quadrature failed to converge (err={err:.2e})")
    return N * unit_ball_volume(N) * val


def bishop_gromov_ratio(space: ModelSpace, x, r, K: float = 0.0, N: float | None = None) -> float:
    if N is None:
        N = space.dim
    vol, _ = space.ball_volume(x, r)
    return vol / v_kn(K, N, float(r))


# ---------------------------------------------------------------------------
# mm-boundary measures
# ---------------------------------------------------------------------------


class Region:
    """Integration region for mm-boundary masses."""

    def __init__(self, kind: str, center=None, radius=None, lo=None, hi=None):
        self.kind = kind
        self.center = None if center is None else np.asarray(center, dtype=np.float64)
        self.radius = None if radius is None else float(radius)
        self.lo = None if lo is None else np.asarray(lo, dtype=np.float64)
        self.hi = None if hi is None else np.asarray(hi, dtype=np.float64)

    @classmethod
    def ball(cls, center, radius) -> "Region":
        return cls("ball", center=center, radius=radius)

    @classmethod
    def box(cls, lo, hi) -> "Region":
        return cls("box", lo=lo, hi=hi)

    def spec(self) -> str:
        if self.kind == "ball":
            return f"ball:{','.join(repr(v) for v in self.center)}:{self.radius!r}"
        return f"box:{','.join(repr(v) for v in self.lo)}:{','.join(repr(v) for v in self.hi)}"


def parse_region(spec: str) -> Region:
    tok = spec.strip().split(":")
    try:
        if tok[0] == "ball" and len(tok) == 3:
            return Region.ball([float(v) for v in tok[1].split(",")], float(tok[2]))
        if tok[0] == "box" and len(tok) == 3:
            return Region.box([float(v) for v in tok[1].split(",")], [float(v) for v in tok[2].split(",")])
        if tok[0] == "unit" and len(tok) == 1:
            return Region("unit")
    except ValueError as exc:
        raise InputError(f"malformed region spec {spec!r}: {exc}") from None
    raise InputError(f"malformed region spec {spec!r}")


def _gl_nodes(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w


def mm_boundary_mass(space: ModelSpace, region: Region, r) -> float:
    """Total variation of the scaled density deficit (1 - theta_r)/r on the
    region: integral of |1 - theta_r(x)| / r over the region."""
    r = _check_r(r)
    if region.kind == "unit":
        region = _default_region(space)
    if isinstance(space, Euclidean):
        return 0.0
    if isinstance(space, HalfSpace):
        n = space.dim
        if region.kind == "box":
            if region.lo.shape != (n,) or region.hi.shape != (n,):
                raise InputError("box bounds must match the space dimension")
            if region.lo[0] != 0.0:
                raise InputError("half-space boxes must start at the boundary (lo[0] = 0)")
            cross = float(np.prod(region.hi[1:] - region.lo[1:]))
            h_top = min(r, float(region.hi[0]))
            # substitute h = r sin(a): the segment-deficit integrand is
            # smooth in a, removing the sqrt kink at h = r
            a_top = math.asin(min(1.0, h_top / r))
            nodes, weights = _gl_nodes(96, 0.0, a_top)
            f = _halfspace_deficit(np.sin(nodes), n)
            return cross * float(np.sum(weights * f * np.cos(nodes)))
        if region.kind == "ball":
            if n != 2:
                raise InputError("ball regions on the half-space are supported in dimension 2")
            c, R = region.center, region.radius
            if abs(float(c[0])) > 1e-12:
                raise InputError("half-space ball regions must be centered on the boundary")
            h_top = min(r, R)
            a_top = math.asin(min(1.0, h_top / r))
            nodes, weights = _gl_nodes(96, 0.0, a_top)
            h = r * np.sin(nodes)
            chord = 2.0 * np.sqrt(np.maximum(R * R - h * h, 0.0))
            f = _halfspace_deficit(np.sin(nodes), n)
            return float(np.sum(weights * f * chord * np.cos(nodes)))
        raise InputError(f"unsupported region kind {region.kind!r}")
    if isinstance(space, FlatCone):
        if region.kind != "ball" or float(region.center[0]) != 0.0:
            raise InputError("cone mm-boundary regions must be apex-centered balls")
        R = region.radius
        # theta_r deviates from 1 only where the ball wraps the apex:
        # rho < r, and rho in [r, r/sin(theta_c/2)) when theta_c < pi
        rho_max = R if space.theta_c >= math.pi else min(R, r / math.sin(0.5 * space.theta_c))
        pieces = [0.0, min(r, rho_max), rho_max]
        total = 0.0
        for a, b in zip(pieces[:-1], pieces[1:]):
            if b <= a:
                continue
            nodes, weights = _gl_nodes(64, a, b)
            dev = np.array([abs(1.0 - space.theta_r(np.array([rho, 0.0]), r)) for rho in nodes])
            total += float(np.sum(weights * dev * nodes))
        return space.theta_c * total / r
    raise InputError(f"mm-boundary masses are not defined for the {space.kind} kind")


def _default_region(space: ModelSpace) -> Region:
    if isinstance(space, Euclidean):
        return Region.ball(np.zeros(space.dim), 1.0)
    if isinstance(space, HalfSpace):
        lo = np.zeros(space.dim)
        hi = np.ones(space.dim)
        return Region.box(lo, hi)
    if isinstance(space, FlatCone):
        return Region.ball(np.array([0.0, 0.0]), 1.0)
    raise InputError(f"no default region for the {space.kind} kind")


# ---------------------------------------------------------------------------
# point-cloud discretizations (stratified jittered grids, cell masses)
# ---------------------------------------------------------------------------


class CloudMeta:
    """Provenance of a discretization: generating region and margins.

    boundary_distance gives, per point, the distance to the artificial
    outer boundary of the sampled region (the genuine geometric boundary
    of a half-space does not count).
    """

    def __init__(self, space: ModelSpace, boundary_distance, cell_size: float):
        self.space = space
        self._boundary_distance = boundary_distance
        self.cell_size = float(cell_size)

    def boundary_distance(self, pts) -> np.ndarray:
        return self._boundary_distance(np.asarray(pts, dtype=np.float64))


def _jitter_grid(lo, hi, cells, rng):
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    cells = np.asarray(cells, dtype=int)
    widths = (hi - lo) / cells
    axes = [lo[d] + widths[d] * (np.arange(cells[d]) + 0.0) for d in range(len(cells))]
    mesh = np.meshgrid(*axes, indexing="ij")
    corners = np.stack([m.ravel() for m in mesh], axis=1)
    jit = rng.random(corners.shape)
    return corners + jit * widths[None, :], float(np.prod(widths))


def euclidean_cloud(space: Euclidean, lo, hi, cells_per_axis: int, seed: int, threads: int = 1):
    """Jittered grid over a box; one point per cell, mass = cell volume."""
    rng = np.random.default_rng(seed)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    cells = np.full(space.dim, int(cells_per_axis))
    pts, cell_vol = _jitter_grid(lo, hi, cells, rng)
    dist = space.distance_matrix(pts, threads=threads)
    fms = FiniteMMSpace(dist, np.full(pts.shape[0], cell_vol))

    def boundary_distance(q):
        return np.minimum((q - lo).min(axis=-1), (hi - q).min(axis=-1))

    widths = float(np.max((hi - lo) / cells))
    return fms, pts, CloudMeta(space, boundary_distance, widths)


def half_space_cloud(space: HalfSpace, hi, cells_per_axis, seed: int, lo=None, threads: int = 1):
    """Jittered grid over a box resting on the boundary {x[0] = 0}.

    Only the lateral and top faces count as artificial boundary.
    """
    rng = np.random.default_rng(seed)
    hi = np.asarray(hi, dtype=np.float64)
    lo = np.zeros(space.dim) if lo is None else np.asarray(lo, dtype=np.float64)
    if lo[0] != 0.0:
        raise InputError("half-space clouds must rest on the boundary")
    cells = np.asarray(cells_per_axis, dtype=int)
    if cells.ndim == 0:
        cells = np.full(space.dim, int(cells))
    pts, cell_vol = _jitter_grid(lo, hi, cells, rng)
    dist = space.distance_matrix(pts, threads=threads)
    fms = FiniteMMSpace(dist, np.full(pts.shape[0], cell_vol))

    def boundary_distance(q):
        lateral = np.minimum((q[..., 1:] - lo[1:]).min(axis=-1), (hi[1:] - q[..., 1:]).min(axis=-1))
        return np.minimum(lateral, hi[0] - q[..., 0])

    widths = float(np.max((hi - lo) / cells))
    return fms, pts, CloudMeta(space, boundary_distance, widths)


def cone_cloud(space: FlatCone, rho_max: float, n_rho: int, n_phi: int, seed: int, threads: int = 1):
    """Jittered polar grid on the cone; masses are exact cell areas."""
    rng = np.random.default_rng(seed)
    rho_max = float(rho_max)
    rho_edges = np.linspace(0.0, rho_max, n_rho + 1)
    phi_edges = np.linspace(0.0, space.theta_c, n_phi + 1)
    pts = []
    masses = []
    for i in range(n_rho):
        r0, r1 = rho_edges[i], rho_edges[i + 1]
        area = 0.5 * (r1 * r1 - r0 * r0) * (phi_edges[1] - phi_edges[0])
        # sample rho uniformly w.r.t. area inside the cell
        u = rng.random(n_phi)
        rho = np.sqrt(r0 * r0 + u * (r1 * r1 - r0 * r0))
        phi = phi_edges[:-1] + rng.random(n_phi) * (phi_edges[1] - phi_edges[0])
        pts.append(np.stack([rho, phi], axis=1))
        masses.append(np.full(n_phi, area))
    pts = np.concatenate(pts, axis=0)
    masses = np.concatenate(masses)
    dist = space.distance_matrix(pts, threads=threads)
    fms = FiniteMMSpace(dist, masses)

    def boundary_distance(q):
        return rho_max - q[..., 0]

    cell = max(rho_max / n_rho, rho_max * space.theta_c / n_phi)
    return fms, pts, CloudMeta(space, boundary_distance, cell)


def carnot_ball_cloud(space: CarnotSpace, R: float, cells_per_axis: int, seed: int, threads: int = 1):
    """Jittered Cartesian grid restricted to the closed gauge ball B_R(0).

    A cell survives when its jittered point lands in the ball; the kept
    point carries the full cell volume (unbiased for the ball measure).
    """
    rng = np.random.default_rng(seed)
    g = space.group
    R = float(R)
    h_bound, v_bound = space.gauge.envelope(g, R)
    lo = np.concatenate([np.full(g.v1, -h_bound), np.full(g.v2, -v_bound)])
    hi = -lo
    cells = np.full(g.dim, int(cells_per_axis))
    pts, cell_vol = _jitter_grid(lo, hi, cells, rng)
    vals = space.gauge.value(g, pts, threads)
    keep = vals <= R
    pts = pts[keep]
    dist = space.distance_matrix(pts, threads=threads)
    fms = FiniteMMSpace(dist, np.full(pts.shape[0], cell_vol))
    gauge_vals = vals[keep]

    def boundary_distance(q):
        return R - space.gauge.value(g, q)

    meta = CloudMeta(space, boundary_distance, float(np.max((hi - lo) / cells)))
    return fms, pts, meta, gauge_vals
