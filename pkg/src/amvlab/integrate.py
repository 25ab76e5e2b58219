"""Means, moments and constants over balls: deterministic quadrature and
seeded Monte Carlo.

Monte Carlo streams are counter-based (Philox keyed by master seed and
stream id), generated sequentially in fixed-size batches, so every estimate
is a pure function of (inputs, seed) no matter how evaluation is laid out.
Grid quadrature over Euclidean balls is a Gauss-Jacobi radial rule times a
product sphere rule (exact for polynomials); gauge balls use slice-adapted
coordinates where the slice measure is smooth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _special

from .carnot import CarnotStep2, Gauge
from .mmspace import InputError
from .models import (
    CarnotSpace,
    Euclidean,
    ModelSpace,
    NumericError,
    unit_ball_volume,
)

_MASK64 = (1 << 64) - 1
_BATCH = 1_000_000


class GridUnavailable(InputError):
    """No deterministic grid rule ships for this space or dimension."""


@dataclass(frozen=True)
class SeedSpec:
    """Counter-based RNG stream: (master seed, stream id) -> Philox key."""

    master: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.master & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master, self.stream + int(offset))


@dataclass
class Estimate:
    """A single numeric estimate with error accounting.

    std_error is zero exactly when the method is deterministic.
    """

    value: float
    std_error: float
    n: int
    method: str

    def to_json(self) -> str:
        return json.dumps(
            {"value": self.value, "std_error": self.std_error, "n": self.n, "method": self.method},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Estimate":
        d = json.loads(text)
        return cls(d["value"], d["std_error"], d["n"], d["method"])


@dataclass(frozen=True)
class MCScheme:
    n: int
    seed: SeedSpec


@dataclass(frozen=True)
class GridScheme:
    res: int


def parse_scheme(spec: str):
    tok = spec.strip().split(":")
    try:
        if tok[0] == "mc" and len(tok) in (2, 3):
            seed = SeedSpec(int(tok[2])) if len(tok) == 3 else SeedSpec(0)
            return MCScheme(int(tok[1]), seed)
        if tok[0] == "grid" and len(tok) == 2:
            return GridScheme(int(tok[1]))
    except ValueError as exc:
        raise InputError(f"malformed scheme spec {spec!r}: {exc}") from None
    raise InputError(f"malformed scheme spec {spec!r}")


def scheme_spec(scheme) -> str:
    if isinstance(scheme, MCScheme):
        return f"mc:{scheme.n}:{scheme.seed.master}" + (
            f"+{scheme.seed.stream}" if scheme.seed.stream else ""
        )
    return f"grid:{scheme.res}"


# ---------------------------------------------------------------------------
# product quadrature over Euclidean balls (dims 1-3)
# ---------------------------------------------------------------------------


def _sphere_rule(k: int, res: int):
    """Nodes and weights integrating over the unit sphere S^(k-1)."""
    if k == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if k == 2:
        m = max(4, 2 * res + 1)
        ang = 2.0 * math.pi * np.arange(m) / m
        nodes = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return nodes, np.full(m, 2.0 * math.pi / m)
    if k == 3:
        m = max(4, 2 * res + 1)
        mu, wmu = np.polynomial.legendre.leggauss(max(2, res))
        ang = 2.0 * math.pi * np.arange(m) / m
        sin_t = np.sqrt(1.0 - mu**2)
        nodes = np.empty((mu.size * m, 3))
        weights = np.empty(mu.size * m)
        for i in range(mu.size):
            s = slice(i * m, (i + 1) * m)
            nodes[s, 0] = sin_t[i] * np.cos(ang)
            nodes[s, 1] = sin_t[i] * np.sin(ang)
            nodes[s, 2] = mu[i]
            weights[s] = wmu[i] * 2.0 * math.pi / m
        return nodes, weights
    raise GridUnavailable(f"no sphere rule for S^{k - 1}; use a Monte Carlo scheme")


def _radial_rule(k: int, res: int):
    """Nodes/weights for int_0^1 t^(k-1) g(t) dt (Gauss-Jacobi)."""
    x, w = _special.roots_jacobi(max(2, res), 0.0, float(k - 1))
    return 0.5 * (x + 1.0), w / 2.0**k


def euclid_ball_quadrature(n: int, r: float, res: int):
    """Nodes and weights for integrals over the centered r-ball in R^n."""
    n = int(n)
    if n > 3:
        raise GridUnavailable(f"no grid rule ships for {n}-dimensional balls; use mc")
    t, wt = _radial_rule(n, res)
    omega, womega = _sphere_rule(n, res)
    nodes = (r * t)[:, None, None] * omega[None, :, :]
    weights = (r**n * wt)[:, None] * womega[None, :]
    return nodes.reshape(-1, n), weights.reshape(-1)


def carnot_ball_quadrature(group: CarnotStep2, gauge: Gauge, r: float, res: int):
    """Adapted product rule over the gauge ball B_r(0).

    Second-layer radius w = (r^2/sqrt(beta)) sin(psi) makes the horizontal
    slice radius r*sqrt(cos(psi)) and the slice measure smooth in psi.
    Available for the quartic gauge kinds with v1 <= 3, v2 <= 3.
    """
    if gauge.kind == "profile":
        raise GridUnavailable("profile gauges have no adapted grid rule; use mc")
    v1, v2 = group.v1, group.v2
    r = float(r)
    if v2 == 0:
        nodes1, w1 = euclid_ball_quadrature(v1, r, res)
        return nodes1, w1
    if v1 > 3 or v2 > 3:
        raise GridUnavailable("grid rule ships for v1 <= 3 and v2 <= 3 only; use mc")
    w_max = r * r / math.sqrt(gauge.beta)
    psi, wpsi = np.polynomial.legendre.leggauss(max(4, res))
    psi = 0.25 * math.pi * (psi + 1.0)
    wpsi = 0.25 * math.pi * wpsi
    omega, womega = _sphere_rule(v2, res)
    nodes_out = []
    weights_out = []
    for i in range(psi.size):
        s, c = math.sin(psi[i]), math.cos(psi[i])
        w = w_max * s
        slice_r = r * math.sqrt(c)
        nodes1, w1 = euclid_ball_quadrature(v1, slice_r, res)
        radial_w = wpsi[i] * (w ** (v2 - 1)) * (w_max * c)
        for j in range(omega.shape[0]):
            block = np.empty((nodes1.shape[0], group.dim))
            block[:, :v1] = nodes1
            block[:, v1:] = w * omega[j]
            nodes_out.append(block)
            weights_out.append(radial_w * womega[j] * w1)
    return np.concatenate(nodes_out, axis=0), np.concatenate(weights_out)


# ---------------------------------------------------------------------------
# sampling and means
# ---------------------------------------------------------------------------


def sample_ball(space: ModelSpace, x, r, n: int, seed: SeedSpec, threads: int = 1) -> np.ndarray:
    """n points uniform for the space's measure on B_r(x); deterministic in
    (inputs, seed)."""
    n = int(n)
    if n < 1:
        raise InputError("sample count must be >= 1")
    return space.sample_ball(x, float(r), n, seed.generator(), threads)


def _values(u, pts) -> np.ndarray:
    vals = u.value(pts) if hasattr(u, "value") else u(pts)
    return np.asarray(vals, dtype=np.float64)


def mean_over_ball(space: ModelSpace, u, x, r, scheme, threads: int = 1) -> Estimate:
    """Mean value of u over B_r(x) with error accounting."""
    r = float(r)
    if isinstance(scheme, GridScheme):
        if isinstance(space, Euclidean):
            nodes, weights = euclid_ball_quadrature(space.dim, r, scheme.res)
            pts = np.asarray(x, dtype=np.float64) + nodes
        elif isinstance(space, CarnotSpace):
            nodes, weights = carnot_ball_quadrature(space.group, space.gauge, r, scheme.res)
            pts = space.group.multiply(np.asarray(x, dtype=np.float64), nodes)
        else:
            raise GridUnavailable(f"no grid rule for the {space.kind} kind; use mc")
        vals = _values(u, pts)
        return Estimate(float(np.sum(weights * vals) / np.sum(weights)), 0.0, weights.size, "grid")
    if isinstance(scheme, MCScheme):
        rng = scheme.seed.generator()
        total = 0.0
        total_sq = 0.0
        done = 0
        while done < scheme.n:
            m = min(_BATCH, scheme.n - done)
            pts = space.sample_ball(x, r, m, rng, threads)
            vals = _values(u, pts)
            total += float(np.sum(vals))
            total_sq += float(np.sum(vals * vals))
            done += m
        mean = total / scheme.n
        var = max(total_sq / scheme.n - mean * mean, 0.0)
        return Estimate(mean, math.sqrt(var / scheme.n), scheme.n, "mc")
    raise InputError(f"unknown scheme {scheme!r}")


def continuum_r_laplacian(space: ModelSpace, u, x, r, scheme, threads: int = 1) -> Estimate:
    """(mean over B_r(x) - u(x)) / r^2."""
    r = float(r)
    est = mean_over_ball(space, u, x, r, scheme, threads)
    ux = float(_values(u, np.asarray(x, dtype=np.float64)[None, :])[0])
    return Estimate((est.value - ux) / r**2, est.std_error / r**2, est.n, est.method)


# ---------------------------------------------------------------------------
# the group's mean value constant and isotropy of the horizontal moment
# ---------------------------------------------------------------------------


def _hsq_moment(group: CarnotStep2, gauge: Gauge, scheme, threads: int = 1) -> Estimate:
    """Mean of |z1|^2 over the unit gauge ball."""
    space = CarnotSpace(group, gauge)
    origin = np.zeros(group.dim)

    def hsq(pts):
        z1 = pts[..., : group.v1]
        return np.sum(z1 * z1, axis=-1)

    return mean_over_ball(space, hsq, origin, 1.0, scheme, threads)


def carnot_constant(group: CarnotStep2, gauge: Gauge, scheme, threads: int = 1) -> Estimate:
    """Leading mean-value coefficient: mean of |z1|^2 over the unit gauge
    ball divided by 2*v1 (so the small-r expansion of the ball mean of u
    reads u(x) + C r^2 * (horizontal Laplacian) + o(r^2))."""
    est = _hsq_moment(group, gauge, scheme, threads)
    c = 1.0 / (2.0 * group.v1)
    return Estimate(c * est.value, c * est.std_error, est.n, est.method)


def carnot_constant_checked(
    group: CarnotStep2,
    gauge: Gauge,
    mc_scheme: MCScheme | None = None,
    grid_res: int = 32,
    rel_tol: float = 1e-3,
    threads: int = 1,
) -> tuple[Estimate, Estimate]:
    """Grid and Monte Carlo estimates of the constant, cross-validated.

    Raises NumericError when the two schemes disagree beyond
    max(3 sigma, rel_tol * value).
    """
    if mc_scheme is None:
        mc_scheme = MCScheme(10_000_000, SeedSpec(20260809))
    grid = carnot_constant(group, gauge, GridScheme(grid_res), threads)
    mc = carnot_constant(group, gauge, mc_scheme, threads)
    gap = abs(grid.value - mc.value)
    allowed = max(3.0 * mc.std_error, rel_tol * abs(grid.value))
    if gap > allowed:
        raise NumericError(
            f"scheme disagreement: grid {grid.value!r} vs mc {mc.value!r} "
            f"(gap {gap:.3e} > allowed {allowed:.3e})"
        )
    return grid, mc


def isotropy_check(
    group: CarnotStep2, gauge: Gauge, directions, scheme, threads: int = 1
) -> list[Estimate]:
    """Second moment of <a, z1> over the unit gauge ball per direction a.

    All directions share one sample stream (or one node set), which keeps
    their comparison free of independent-noise inflation.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    if directions.shape[1] != group.v1:
        raise InputError("directions must live in the horizontal layer")
    norms = np.sqrt(np.sum(directions * directions, axis=1))
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise InputError("directions must be unit vectors")
    space = CarnotSpace(group, gauge)
    origin = np.zeros(group.dim)
    k = directions.shape[0]
    if isinstance(scheme, GridScheme):
        nodes, weights = carnot_ball_quadrature(group, gauge, 1.0, scheme.res)
        total_w = float(np.sum(weights))
        proj = nodes[:, : group.v1] @ directions.T
        vals = weights @ (proj * proj) / total_w
        return [Estimate(float(v), 0.0, weights.size, "grid") for v in vals]
    if isinstance(scheme, MCScheme):
        rng = scheme.seed.generator()
        total = np.zeros(k)
        total_sq = np.zeros(k)
        done = 0
        while done < scheme.n:
            m = min(_BATCH, scheme.n - done)
            pts = space.sample_ball(origin, 1.0, m, rng, threads)
            proj = pts[:, : group.v1] @ directions.T
            sq = proj * proj
            total += sq.sum(axis=0)
            total_sq += (sq * sq).sum(axis=0)
            done += m
        mean = total / scheme.n
        var = np.maximum(total_sq / scheme.n - mean * mean, 0.0)
        serr = np.sqrt(var / scheme.n)
        return [Estimate(float(mean[i]), float(serr[i]), scheme.n, "mc") for i in range(k)]
    raise InputError(f"unknown scheme {scheme!r}")


def carnot_ball_volume_mc(space: CarnotSpace, x, r, n: int, seed: SeedSpec) -> Estimate:
    """Haar volume of B_r(x) by plain coordinate-box rejection.

    Candidates are Lebesgue-uniform in a coordinate box that covers the
    ball, and acceptance tests the gauge distance to x directly, so this
    estimate does not assume translation invariance (it is the oracle for
    that invariance).
    """
    g = space.group
    x = g._check(np.asarray(x, dtype=np.float64))
    r = float(r)
    h_bound, v_bound = space.gauge.envelope(g, r)
    x1 = x[: g.v1]
    lo = np.empty(g.dim)
    hi = np.empty(g.dim)
    lo[: g.v1] = x1 - h_bound
    hi[: g.v1] = x1 + h_bound
    for k in range(g.v2):
        slack = v_bound + 0.5 * float(np.sum(np.abs(g.bracket[k].T @ x1))) * h_bound
        lo[g.v1 + k] = x[g.v1 + k] - slack
        hi[g.v1 + k] = x[g.v1 + k] + slack
    box_vol = float(np.prod(hi - lo))
    rng = seed.generator()
    hits = 0
    done = 0
    from .carnot import distance as _dist

    while done < n:
        m = min(_BATCH, n - done)
        cand = rng.uniform(lo, hi, (m, g.dim))
        d = _dist(g, space.gauge, cand, x[None, :])
        hits += int(np.sum(d < r))
        done += m
    p = hits / n
    return Estimate(box_vol * p, box_vol * math.sqrt(max(p * (1 - p), 0.0) / n), n, "monte_carlo")
