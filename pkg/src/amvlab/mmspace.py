"""Averaging operators on finite metric measure spaces.

A finite space is a symmetric nonnegative distance matrix plus a positive
mass per point.  Balls use the open convention B_r(x) = {y : d(x,y) < r},
so every center belongs to its own ball and all ball masses are positive.
Radii that coincide exactly with a pairwise distance sit on a measure
discontinuity; callers should perturb such radii (see
``is_collision_radius``).

Scalar fields are plain one-dimensional float arrays indexed in point
order.  All operations are pure functions; summations run in fixed
index-ascending order so results do not depend on evaluation layout.
Row-blocked evaluation keeps memory at O(block * n) for large point
clouds.
"""

from __future__ import annotations

import io

import numpy as np

_BLOCK = 1024


class InputError(ValueError):
    """Invalid argument to an operator (unknown point, bad radius, shape)."""


class FiniteMMSpace:
    """Finite point set with a symmetric distance matrix and point masses.

    The triangle inequality is deliberately not validated: none of the
    averaging operators use it, and the identity tests cover arbitrary
    symmetric "distances".
    """

    def __init__(self, dist, mass, point_ids=None):
        dist = np.asarray(dist, dtype=np.float64)
        mass = np.asarray(mass, dtype=np.float64)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise InputError("dist must be a square matrix")
        n = dist.shape[0]
        if mass.shape != (n,):
            raise InputError("mass must be a vector matching the point count")
        if not np.all(np.isfinite(dist)) or not np.all(np.isfinite(mass)):
            raise InputError("dist and mass must be finite")
        if np.any(dist < 0):
            raise InputError("dist must be nonnegative")
        if np.any(np.diag(dist) != 0):
            raise InputError("dist must have a zero diagonal")
        if not np.array_equal(dist, dist.T):
            raise InputError("dist must be symmetric")
        if np.any(mass <= 0):
            raise InputError("mass must be positive")
        self.dist = dist
        self.mass = mass
        if point_ids is None:
            point_ids = list(range(n))
        if len(point_ids) != n:
            raise InputError("point_ids length must match the point count")
        self.point_ids = list(point_ids)
        self._index = {pid: i for i, pid in enumerate(self.point_ids)}
        if len(self._index) != n:
            raise InputError("point_ids must be unique")

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def index_of(self, point) -> int:
        try:
            return self._index[point]
        except KeyError:
            raise InputError(f"unknown point id: {point!r}") from None

    def total_mass(self) -> float:
        return float(np.sum(self.mass))


def as_field(space: FiniteMMSpace, values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (space.n,):
        raise InputError(f"field must have length {space.n}, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise InputError("field entries must be finite")
    return values


def check_radius(r) -> float:
    r = float(r)
    if not (r > 0) or not np.isfinite(r):
        raise InputError(f"radius must be a positive finite real, got {r}")
    return r


def is_collision_radius(space: FiniteMMSpace, r) -> bool:
    """True when r equals some pairwise distance (ball membership is
    discontinuous in r there)."""
    return bool(np.any(space.dist == float(r)))


def ball(space: FiniteMMSpace, x, r):
    """Members and total mass of the open ball around point id x."""
    r = check_radius(r)
    i = space.index_of(x)
    members = np.flatnonzero(space.dist[i] < r)
    return members, float(np.sum(space.mass[members]))


def ball_masses(space: FiniteMMSpace, r) -> np.ndarray:
    """mu(B_r(x)) for every x, in point order."""
    r = check_radius(r)
    out = np.empty(space.n)
    for s in range(0, space.n, _BLOCK):
        e = min(s + _BLOCK, space.n)
        w = space.dist[s:e] < r
        out[s:e] = (w * space.mass[None, :]).sum(axis=1)
    return out


def average(space: FiniteMMSpace, u, r) -> np.ndarray:
    """Ball average A_r u(x) = mean of u over B_r(x) against the masses."""
    u = as_field(space, u)
    r = check_radius(r)
    um = u * space.mass
    out = np.empty(space.n)
    for s in range(0, space.n, _BLOCK):
        e = min(s + _BLOCK, space.n)
        w = space.dist[s:e] < r
        out[s:e] = (w * um[None, :]).sum(axis=1) / (w * space.mass[None, :]).sum(axis=1)
    return out


def adjoint_average(space: FiniteMMSpace, u, r) -> np.ndarray:
    """Formal adjoint A_r* u(x) = sum over the ball of u(y) m(y)/mu(B_r(y))."""
    u = as_field(space, u)
    r = check_radius(r)
    coef = u * space.mass / ball_masses(space, r)
    out = np.empty(space.n)
    for s in range(0, space.n, _BLOCK):
        e = min(s + _BLOCK, space.n)
        w = space.dist[s:e] < r
        out[s:e] = (w * coef[None, :]).sum(axis=1)
    return out


def a_r(space: FiniteMMSpace, r) -> np.ndarray:
    """A_r* applied to the constant 1."""
    return adjoint_average(space, np.ones(space.n), r)


def r_laplacian(space: FiniteMMSpace, u, r) -> np.ndarray:
    r = check_radius(r)
    u = as_field(space, u)
    return (average(space, u, r) - u) / r**2


def adjoint_r_laplacian(space: FiniteMMSpace, u, r) -> np.ndarray:
    r = check_radius(r)
    u = as_field(space, u)
    return (adjoint_average(space, u, r) - u) / r**2


def kernel_matrix(space: FiniteMMSpace, r) -> np.ndarray:
    """Symmetric mean value kernel k_r(x,y), zero off the open ball."""
    r = check_radius(r)
    inv = 1.0 / ball_masses(space, r)
    w = space.dist < r
    return np.where(w, 0.5 * (inv[:, None] + inv[None, :]), 0.0)


def sym_r_laplacian(space: FiniteMMSpace, u, r) -> np.ndarray:
    """Symmetrized r-laplacian, computed from the kernel itself.

    This is intentionally a different route than the expansion
    (r_laplacian + adjoint - u * adjoint of 1)/2, which tests assert
    against it.
    """
    u = as_field(space, u)
    r = check_radius(r)
    inv = 1.0 / ball_masses(space, r)
    out = np.empty(space.n)
    for s in range(0, space.n, _BLOCK):
        e = min(s + _BLOCK, space.n)
        w = space.dist[s:e] < r
        k = 0.5 * (inv[s:e, None] + inv[None, :]) * w
        out[s:e] = (k * (u[None, :] - u[s:e, None]) * space.mass[None, :]).sum(axis=1)
    return out / r**2


def delta_r(space: FiniteMMSpace, x, y, r) -> float:
    """Relative ball-mass deficit 1 - mu(B_r(x))/mu(B_r(y))."""
    r = check_radius(r)
    i = space.index_of(x)
    j = space.index_of(y)
    masses = ball_masses(space, r)
    return float(1.0 - masses[i] / masses[j])


def energy_density(space: FiniteMMSpace, u, v, r) -> np.ndarray:
    """Approximate energy density e_r(u,v), a symmetric bilinear form."""
    u = as_field(space, u)
    v = as_field(space, v)
    r = check_radius(r)
    out = np.empty(space.n)
    for s in range(0, space.n, _BLOCK):
        e = min(s + _BLOCK, space.n)
        w = space.dist[s:e] < r
        du = u[None, :] - u[s:e, None]
        dv = v[None, :] - v[s:e, None]
        num = (w * du * dv * space.mass[None, :]).sum(axis=1)
        out[s:e] = 0.5 * num / (w * space.mass[None, :]).sum(axis=1)
    return out / r**2


def total_energy(space: FiniteMMSpace, u, v, r) -> float:
    return float(np.sum(energy_density(space, u, v, r) * space.mass))


def weak_pairing(space: FiniteMMSpace, phi, u, r) -> float:
    """Integral of phi * (r-laplacian of u) against the measure."""
    phi = as_field(space, phi)
    return float(np.sum(phi * r_laplacian(space, u, r) * space.mass))


# ---------------------------------------------------------------------------
# text serialization
#
# Grammar (see README for the commented version):
#   line 1:            n  (point count, positive integer)
#   lines 2 .. n:      strict lower triangle of dist; line k has k-1 entries
#                      d(k,1) ... d(k,k-1), whitespace-separated decimals
#   last line:         n masses, whitespace-separated decimals
# Blank lines and lines starting with '#' are ignored.
# ---------------------------------------------------------------------------


def save_space(space: FiniteMMSpace, path_or_file) -> None:
    def _write(f):
        f.write(f"{space.n}\n")
        for i in range(1, space.n):
            f.write(" ".join(repr(float(v)) for v in space.dist[i, :i]) + "\n")
        f.write(" ".join(repr(float(v)) for v in space.mass) + "\n")

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w") as f:
            _write(f)


def load_space(path_or_file) -> FiniteMMSpace:
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file) as f:
            text = f.read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise InputError("empty space file")
    try:
        n = int(lines[0])
    except ValueError:
        raise InputError(f"first line must be the point count, got {lines[0]!r}") from None
    if n < 1:
        raise InputError("point count must be >= 1")
    if len(lines) != n + 1:
        raise InputError(f"expected {n + 1} content lines for n={n}, got {len(lines)}")
    dist = np.zeros((n, n))
    for i in range(1, n):
        row = [float(tok) for tok in lines[i].split()]
        if len(row) != i:
            raise InputError(f"distance row {i + 1} must have {i} entries, got {len(row)}")
        dist[i, :i] = row
        dist[:i, i] = row
    mass = np.array([float(tok) for tok in lines[n].split()])
    if mass.shape != (n,):
        raise InputError(f"mass line must have {n} entries, got {mass.shape[0]}")
    return FiniteMMSpace(dist, mass)


def save_field(values, path_or_file) -> None:
    values = np.asarray(values, dtype=np.float64)
    text = "".join(repr(float(v)) + "\n" for v in values)
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as f:
            f.write(text)


def load_field(path_or_file) -> np.ndarray:
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file) as f:
            text = f.read()
    vals = [float(ln) for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    return np.array(vals, dtype=np.float64)


def space_to_text(space: FiniteMMSpace) -> str:
    buf = io.StringIO()
    save_space(space, buf)
    return buf.getvalue()


def space_from_text(text: str) -> FiniteMMSpace:
    return load_space(io.StringIO(text))


# ---------------------------------------------------------------------------
# identity suite
# ---------------------------------------------------------------------------


def random_space(rng: np.random.Generator, n_max: int = 40) -> FiniteMMSpace:
    """Random instance: symmetric distances in (0, 2), masses in [0.1, 10]."""
    n = int(rng.integers(2, n_max + 1))
    a = rng.uniform(0.05, 2.0, size=(n, n))
    dist = np.triu(a, 1)
    dist = dist + dist.T
    mass = rng.uniform(0.1, 10.0, size=n)
    return FiniteMMSpace(dist, mass)


def identity_residuals(space: FiniteMMSpace, u, v, r) -> dict:
    """Relative residuals of the exact operator identities.

    Each residual is |lhs - rhs| divided by the magnitude of the terms that
    enter it (so near-cancellation does not inflate it); the identities hold
    to machine precision, residuals ~1e-16.
    """
    u = as_field(space, u)
    v = as_field(space, v)
    r = check_radius(r)
    m = space.mass
    lap_u = r_laplacian(space, u, r)
    lap_v = r_laplacian(space, v, r)
    adj_u = adjoint_r_laplacian(space, u, r)
    adj_v = adjoint_r_laplacian(space, v, r)
    adj_one = adjoint_r_laplacian(space, np.ones(space.n), r)
    sym_u = sym_r_laplacian(space, u, r)
    sym_v = sym_r_laplacian(space, v, r)

    def rel(lhs, rhs, scale):
        return float(abs(lhs - rhs) / max(scale, 1e-300))

    def rel_pointwise(lhs, rhs, scale):
        return float(np.max(np.abs(lhs - rhs) / np.maximum(scale, 1e-300)))

    # magnitude of the sums inside each operator evaluation: the roundoff a
    # residual inherits is relative to these, not to the (possibly
    # cancelling) outputs
    abs_u, abs_v = np.abs(u), np.abs(v)
    s_u = (average(space, abs_u, r) + abs_u) / r**2
    s_v = (average(space, abs_v, r) + abs_v) / r**2
    s_uv = (average(space, np.abs(u * v), r) + np.abs(u * v)) / r**2
    s_adj_u = (adjoint_average(space, abs_u, r) + abs_u) / r**2
    s_adj_v = (adjoint_average(space, abs_v, r) + abs_v) / r**2
    s_one = (a_r(space, r) + 1.0) / r**2

    out = {}

    # Green: int v (lap u) = int u (adj lap v)
    lhs = float(np.sum(v * lap_u * m))
    rhs = float(np.sum(u * adj_v * m))
    scale = float(np.sum((abs_v * s_u + abs_u * s_adj_v) * m))
    out["green"] = rel(lhs, rhs, scale)

    # symmetrization identity: sym = (lap + adj - u * adj(1)) / 2
    rhs_pw = 0.5 * (lap_u + adj_u - u * adj_one)
    scale_pw = s_u + s_adj_u + abs_u * s_one
    out["symmetrization"] = rel_pointwise(sym_u, rhs_pw, scale_pw)

    # product rule: lap(uv) = u lap v + 2 e_r(u,v) + v lap u
    e_uv = energy_density(space, u, v, r)
    lhs_pw = r_laplacian(space, u * v, r)
    rhs_pw = u * lap_v + 2.0 * e_uv + v * lap_u
    scale_pw = abs_u * s_v + abs_v * s_u + s_uv
    out["product_rule"] = rel_pointwise(lhs_pw, rhs_pw, scale_pw)

    # pairing vs energy: int v sym(u) = -E_r(u,v)
    lhs = float(np.sum(v * sym_u * m))
    rhs = -total_energy(space, u, v, r)
    scale = float(np.sum((abs_v * (s_u + s_adj_u) + abs_u * s_v + s_uv) * m))
    out["energy_pairing"] = rel(lhs, rhs, scale)

    # self-adjointness of the symmetrized laplacian
    lhs = float(np.sum(v * sym_u * m))
    rhs = float(np.sum(u * sym_v * m))
    scale = float(
        np.sum((abs_v * (s_u + s_adj_u + abs_u * s_one) + abs_u * (s_v + s_adj_v + abs_v * s_one)) * m)
    )
    out["sym_self_adjoint"] = rel(lhs, rhs, scale)

    # deviation identity: int v (lap - sym) u = mass-deficit pairing
    masses = ball_masses(space, r)
    w = space.dist < r
    dlt = 1.0 - masses[:, None] / masses[None, :]
    inner = (w * dlt * (u[None, :] - u[:, None]) * m[None, :]).sum(axis=1) / masses
    rhs = float(np.sum(0.5 * v * inner / r**2 * m))
    lhs = float(np.sum(v * (lap_u - sym_u) * m))
    # lhs is a difference of two pairings, so its roundoff scales with the
    # sums inside the pairings, not with the (possibly tiny) difference
    scale = float(np.sum(abs_v * (s_u + s_adj_u + abs_u * s_one) * m))
    out["deviation"] = rel(lhs, rhs, scale)

    # kernel symmetry and support
    k = kernel_matrix(space, r)
    out["kernel_symmetry"] = float(np.max(np.abs(k - k.T)) / max(np.max(np.abs(k)), 1e-300))
    out["kernel_support"] = float(np.max(np.abs(k[space.dist >= r]), initial=0.0))

    # constants are annihilated (adjoint only up to c * adj(1));
    # normalize by the c/r^2 magnitude of the averaging sums
    c = np.full(space.n, 3.25)
    kill = max(
        float(np.max(np.abs(r_laplacian(space, c, r)))),
        float(np.max(np.abs(sym_r_laplacian(space, c, r)))),
    )
    out["constant_kill"] = kill / (3.25 * (1.0 + 1.0 / r**2))
    out["adjoint_constant"] = rel_pointwise(
        adjoint_r_laplacian(space, c, r),
        3.25 * adj_one,
        np.abs(3.25 * adj_one) + 3.25,
    )
    return out


def run_identity_suite(count: int, size_max: int, seed: int, fault_inject: bool = False) -> dict:
    """Run the exact-identity suite on random instances.

    Returns {"ok": bool, "worst": {identity: residual}, "count": count}; a
    violating instance is serialized under "offender" for replay.  With
    fault_inject, one mass of the final instance is perturbed, which must
    trip the suite (negative control).
    """
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}
    offender = None
    tol = 1e-12
    for trial in range(count):
        space = random_space(rng, size_max)
        u = rng.uniform(-3.0, 3.0, size=space.n)
        v = rng.uniform(-3.0, 3.0, size=space.n)
        r = float(rng.uniform(0.2, 2.2))
        while is_collision_radius(space, r):  # pragma: no cover - measure-zero
            r = float(rng.uniform(0.2, 2.2))
        if fault_inject and trial == count - 1:
            # perturb one ball mass after the fact: recompute lhs with a
            # corrupted space but rhs with the original
            bad = FiniteMMSpace(space.dist, space.mass * np.where(np.arange(space.n) == 0, 1.01, 1.0))
            res = identity_residuals(bad, u, v, r)
            lhs = float(np.sum(v * r_laplacian(space, u, r) * space.mass))
            rhs = float(np.sum(u * adjoint_r_laplacian(bad, v, r) * bad.mass))
            res["green"] = max(res["green"], abs(lhs - rhs) / max(abs(lhs) + abs(rhs), 1e-300))
            space = bad
        else:
            res = identity_residuals(space, u, v, r)
        for name, val in res.items():
            if val > worst.get(name, 0.0):
                worst[name] = val
        if any(val > tol for val in res.values()) and offender is None:
            offender = {
                "space": space_to_text(space),
                "u": u.tolist(),
                "v": v.tolist(),
                "r": r,
                "residuals": res,
            }
    ok = all(val <= tol for val in worst.values()) if worst else True
    summary = {"ok": ok, "count": count, "tolerance": tol, "worst": worst}
    if offender is not None:
        summary["offender"] = offender
    return summary
