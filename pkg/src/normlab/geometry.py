"""Cones, boundary normals, monotonicity directions, squeeze and shear.

A direction nu is (weakly) monotone for a unit ball K when every regular
boundary point x with <x, nu> > 0 has outward normal n(x) with
<n(x), nu> >= 0; strict monotonicity asks for > 0. The two constructive
results implemented here:

* ``find_two_strict_directions``: squeeze the ball along the axis of its
  Euclidean-farthest boundary point until a second, angularly separated
  farthest point appears; each farthest point contributes its
  perpendicular as a certified strict direction.
* ``shear_for_weak_monotonicity``: shear so the supporting lines at the
  two points where a given line meets the boundary become parallel to the
  line's normal, which makes that normal weakly monotone.

Everything operates on immutable inputs; boundary scans are deterministic
for fixed sample counts (reductions are min/max).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from normlab.errors import (
    ConstructionError,
    DegenerateNormError,
    InvalidDescriptorError,
    MonotonicityCertificateError,
)
from normlab.norms import (
    EuclideanNorm,
    LinearImageNorm,
    LpNorm,
    PolygonNorm,
    angular_distance,
)

DEFAULT_SIGMA_GRID = (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625)


class LinearMap2:
    """Invertible 2x2 map with cached inverse and determinant."""

    def __init__(self, matrix, cond_guard=1e-12):
        m = np.array(matrix, dtype=np.float64).reshape(2, 2)
        det = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
        scale = float(np.max(np.abs(m)))
        if scale == 0.0 or abs(det) <= cond_guard * scale * scale:
            raise InvalidDescriptorError(f"map is singular within guard: det={det}")
        inv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
        rt = np.max(np.abs(m @ inv - np.eye(2)))
        if rt > 1e-10:
            raise InvalidDescriptorError(f"inverse round-trip error {rt:.2e}")
        m.setflags(write=False)
        inv.setflags(write=False)
        self.matrix = m
        self.inverse = inv
        self.determinant = det

    @classmethod
    def identity(cls):
        return cls(np.eye(2))

    @classmethod
    def rotation(cls, angle):
        c, s = math.cos(angle), math.sin(angle)
        return cls(np.array([[c, -s], [s, c]]))

    @classmethod
    def diagonal(cls, a, b):
        return cls(np.array([[a, 0.0], [0.0, b]]))

    def apply(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim == 1:
            return self.matrix @ pts
        return pts @ self.matrix.T

    def inverse_apply(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim == 1:
            return self.inverse @ pts
        return pts @ self.inverse.T

    def compose(self, other):
        """self after other."""
        return LinearMap2(self.matrix @ other.matrix)

    def inverted(self):
        return LinearMap2(self.inverse)

    def to_json_tuple(self):
        """Row-major 4-tuple."""
        m = self.matrix
        return [m[0, 0], m[0, 1], m[1, 0], m[1, 1]]

    @classmethod
    def from_json_tuple(cls, t):
        a, b, c, d = (float(v) for v in t)
        return cls(np.array([[a, b], [c, d]]))

    def __repr__(self):
        return f"LinearMap2({self.matrix.tolist()})"


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    n = math.hypot(v[0], v[1])
    if n == 0.0:
        raise ValueError("zero vector has no direction")
    return v / n


def perp(v):
    """Counterclockwise quarter turn."""
    return np.array([-v[1], v[0]])


@dataclass(frozen=True)
class Cone:
    """Bilateral or directional cone with Euclidean projections.

    Membership: |component of y - apex orthogonal to the axis| is at most
    aperture * |axis component|; the directional kind additionally
    requires a nonnegative axis component.
    """

    apex: np.ndarray
    kind: str  # "bilateral" | "directional"
    axis: np.ndarray  # Euclidean unit
    aperture: float

    @classmethod
    def bilateral(cls, apex, axis, aperture):
        return cls(np.asarray(apex, dtype=np.float64), "bilateral", _unit(axis), float(aperture))

    @classmethod
    def directional(cls, apex, axis, aperture):
        return cls(np.asarray(apex, dtype=np.float64), "directional", _unit(axis), float(aperture))


def cone_contains(cone, y):
    return bool(cone_contains_batch(cone, np.asarray(y, dtype=np.float64).reshape(1, 2))[0])


def cone_contains_batch(cone, pts):
    d = np.asarray(pts, dtype=np.float64) - cone.apex
    along = d @ cone.axis
    across = d @ perp(cone.axis)
    ok = np.abs(across) <= cone.aperture * np.abs(along)
    # the apex itself always belongs
    ok |= (d[:, 0] == 0.0) & (d[:, 1] == 0.0)
    if cone.kind == "directional":
        ok &= along >= 0.0
    return ok


def boundary_normal(n, x, ray_tol=1e-9):
    """Euclidean-unit outward normal at a regular boundary point."""
    g = n.gradient(x, ray_policy="error", ray_tol=ray_tol)
    return g / math.hypot(g[0], g[1])


# -- monotonicity ----------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityReport:
    direction: np.ndarray
    classification: str  # "strict" | "weak" | "none"
    min_dot: float
    witness: np.ndarray
    eta: float
    tau: float
    samples: int

    def csv_row(self):
        return [
            self.direction[0],
            self.direction[1],
            self.classification,
            self.min_dot,
            self.witness[0],
            self.witness[1],
        ]


def _sample_angles(n, samples, ray_tol):
    """Uniform angular grid plus the descriptor's landmark directions,
    with ray directions removed."""
    grid = (np.arange(samples) + 0.5) * (2.0 * math.pi / samples)
    feats = n.feature_angles()
    rays = n.ray_angles()
    angles = np.concatenate([grid, feats])
    if rays.size:
        keep = np.ones(angles.size, dtype=bool)
        for r in rays:
            keep &= angular_distance(angles, r) > ray_tol
        angles = angles[keep]
    return np.unique(angles)


def classify_monotonicity(n, nu, samples=4096, eta=1e-3, tau=1e-9, ray_tol=1e-9):
    """Classify a direction as strict/weak/none by scanning regular
    boundary points x with <x, nu> > eta for the minimum of <n(x), nu>."""
    if samples < 64:
        raise ValueError("need at least 64 samples")
    nu = _unit(nu)
    angles = _sample_angles(n, samples, ray_tol)
    pts = n.boundary_batch(angles)
    keep = pts @ nu > eta
    pts = pts[keep]
    if pts.shape[0] == 0:
        raise DegenerateNormError("no regular boundary samples on the positive side")
    grads, _ = n.gradient_batch(pts, ray_policy="midpoint", ray_tol=ray_tol)
    norms = np.hypot(grads[:, 0], grads[:, 1])
    dots = (grads @ nu) / norms
    i = int(np.argmin(dots))
    m = float(dots[i])
    if m > tau:
        cls = "strict"
    elif m >= -tau:
        cls = "weak"
    else:
        cls = "none"
    return MonotonicityReport(nu, cls, m, pts[i].copy(), eta, tau, samples)


@dataclass(frozen=True)
class QuantMonotonicity:
    sigma: float
    delta: float
    sigmas: np.ndarray
    deltas: np.ndarray


def quantitative_monotonicity(n, nu, sigma_grid=DEFAULT_SIGMA_GRID, samples=2048, ray_tol=1e-9):
    """Largest cone aperture around a boundary point with a positive
    subgradient pairing constant.

    ``nu`` is scaled to the unit sphere of the norm; for each sigma the
    constant is the infimum of <v, nu_boundary> over subgradients v at
    boundary points inside the cone of aperture sigma about nu. The
    infimum over a subgradient segment sits at an endpoint, so kinked
    directions contribute both endpoints exactly. Evaluations happen once
    on a master grid containing every cone edge, which makes the returned
    constants exactly antitone in sigma.
    """
    nu = np.asarray(nu, dtype=np.float64)
    scale = n.value(nu)
    if scale == 0.0:
        raise ValueError("direction must be nonzero")
    nu_b = nu / scale
    theta0 = math.atan2(nu_b[1], nu_b[0])
    sigmas = np.asarray(sorted(set(float(s) for s in sigma_grid), reverse=True))
    if np.any(sigmas <= 0.0):
        raise ValueError("apertures must be positive")
    half_widths = np.arctan(sigmas)
    a_max = float(half_widths[0])

    offsets = np.linspace(-a_max, a_max, samples)
    offsets = np.concatenate([offsets, half_widths, -half_widths])
    feats = np.concatenate([n.feature_angles(), n.ray_angles()])
    if feats.size:
        rel = np.mod(feats - theta0 + math.pi, 2.0 * math.pi) - math.pi
        offsets = np.concatenate([offsets, rel[np.abs(rel) <= a_max]])
    offsets = np.unique(offsets)
    angles = theta0 + offsets

    pts = n.boundary_batch(angles)
    on_ray = n.on_ray_mask(pts, ray_tol)
    vals = np.empty(angles.size)
    reg = ~on_ray
    if np.any(reg):
        grads, _ = n.gradient_batch(pts[reg], ray_policy="midpoint", ray_tol=ray_tol)
        vals[reg] = grads @ nu_b
    for i in np.flatnonzero(on_ray):
        vals[i] = n.subdifferential(pts[i]).min_dot(nu_b)

    abs_off = np.abs(offsets)
    deltas = np.array([float(np.min(vals[abs_off <= hw])) for hw in half_widths])
    pos = deltas > 0.0
    if not np.any(pos):
        raise MonotonicityCertificateError(
            f"no positive constant on the aperture grid {list(sigmas)}; descriptor is broken"
        )
    j = int(np.flatnonzero(pos)[0])  # sigmas sorted descending
    return QuantMonotonicity(float(sigmas[j]), float(deltas[j]), sigmas, deltas)


# -- farthest boundary point ----------------------------------------------

def _ball_vertices(n):
    """Vertices of the unit ball when it is a polygon, else None."""
    if isinstance(n, PolygonNorm):
        return n.vertices
    if isinstance(n, LpNorm):
        if n.p == 1.0:
            return np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        if n.p == math.inf:
            return np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
        return None
    if isinstance(n, LinearImageNorm):
        inner = _ball_vertices(n.inner)
        if inner is None:
            return None
        return n.map.apply(inner)
    return None


def farthest_boundary_point(n, grid=8192, round_tol=1e-9):
    """Euclidean-farthest point of the unit sphere of ``n``.

    Returns ``(point, radius, is_round)``; ``is_round`` flags spheres
    whose Euclidean radius is constant within tolerance (the circle,
    where every boundary point qualifies).
    """
    verts = _ball_vertices(n)
    if verts is not None:
        r2 = verts[:, 0] ** 2 + verts[:, 1] ** 2
        i = int(np.argmax(r2))
        return verts[i].copy(), float(math.sqrt(r2[i])), False
    if isinstance(n, EuclideanNorm) or (isinstance(n, LpNorm) and n.p == 2.0):
        return np.array([1.0, 0.0]), 1.0, True
    if isinstance(n, LpNorm):
        if n.p < 2.0:
            return np.array([1.0, 0.0]), 1.0, False
        t = 2.0 ** (-1.0 / n.p)
        return np.array([t, t]), 2.0 ** (0.5 - 1.0 / n.p), False

    angles = np.unique(np.concatenate([
        np.linspace(0.0, 2.0 * math.pi, grid, endpoint=False),
        n.feature_angles(),
    ]))
    pts = n.boundary_batch(angles)
    radii = np.hypot(pts[:, 0], pts[:, 1])
    rmax = float(np.max(radii))
    if rmax - float(np.min(radii)) <= round_tol * rmax:
        return pts[int(np.argmax(radii))].copy(), rmax, True
    i = int(np.argmax(radii))

    def rad(theta):
        p = n.boundary_point(theta)
        return math.hypot(p[0], p[1])

    lo = angles[i] - 2.0 * math.pi / grid
    hi = angles[i] + 2.0 * math.pi / grid
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = rad(c), rad(d)
    for _ in range(80):
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = rad(d)
        else:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = rad(c)
    theta = 0.5 * (a + b)
    p = n.boundary_point(theta)
    r = math.hypot(p[0], p[1])
    if r < rmax:
        p, r = pts[i].copy(), rmax
    return p, r, False


# -- two strict directions -------------------------------------------------

@dataclass
class TwoStrictDirections:
    map: LinearMap2
    nu1: np.ndarray
    nu2: np.ndarray
    degenerate: bool
    epsilon: float
    reports: dict = field(default_factory=dict)

    @property
    def norm_after(self):
        return self._norm_after

    def certificates_strict(self):
        return (
            self.reports["classify_nu1"].classification == "strict"
            and self.reports["classify_nu2"].classification == "strict"
        )


def _certify(body, nu, samples, sigma_grid):
    rep = classify_monotonicity(body, nu, samples=samples)
    quant = None
    if rep.classification == "strict":
        try:
            quant = quantitative_monotonicity(body, nu, sigma_grid=sigma_grid)
        except MonotonicityCertificateError:
            quant = None
    return rep, quant


def find_two_strict_directions(
    n,
    theta_min=math.radians(5.0),
    eps_start=0.5,
    eps_underflow=1e-8,
    samples=4096,
    sigma_grid=DEFAULT_SIGMA_GRID,
):
    """Linear change of variables giving two certified strict directions.

    The farthest boundary point is rotated onto the positive y-axis and
    the ball is squeezed vertically by diag(1, eps). The perpendicular of
    a Euclidean-farthest contact is strict, so e1 certifies immediately;
    eps halves until the squeezed body's farthest point separates from
    the y-axis by theta_min, and its perpendicular is the second
    direction. Round balls (constant boundary radius) take the degenerate
    branch: the identity map with any orthogonal pair.
    """
    xbar, rad, is_round = farthest_boundary_point(n)

    def _finish(mapping, nu1, nu2, degenerate, eps):
        body = LinearImageNorm(mapping, n) if not degenerate else n
        rep1, q1 = _certify(body, nu1, samples, sigma_grid)
        rep2, q2 = _certify(body, nu2, samples, sigma_grid)
        res = TwoStrictDirections(
            mapping, nu1, nu2, degenerate, eps,
            reports={
                "classify_nu1": rep1, "classify_nu2": rep2,
                "quant_nu1": q1, "quant_nu2": q2,
            },
        )
        res._norm_after = body
        return res

    if is_round:
        return _finish(LinearMap2.identity(), np.array([1.0, 0.0]), np.array([0.0, 1.0]), True, 1.0)

    phi = math.atan2(xbar[1], xbar[0])
    rot = LinearMap2.rotation(0.5 * math.pi - phi)
    eps = eps_start
    while eps >= eps_underflow:
        squeeze = LinearMap2.diagonal(1.0, eps).compose(rot)
        body = LinearImageNorm(squeeze, n)
        x_eps, _, _ = farthest_boundary_point(body)
        theta_eps = math.atan2(x_eps[1], x_eps[0])
        sep = min(angular_distance(theta_eps, 0.5 * math.pi), angular_distance(theta_eps, 1.5 * math.pi))
        if sep >= theta_min:
            nu1 = np.array([1.0, 0.0])
            nu2 = perp(_unit(x_eps))
            res = _finish(squeeze, nu1, nu2, False, eps)
            if res.certificates_strict():
                return res
        eps *= 0.5
    # only reachable for effectively round balls; fall back explicitly
    res = _finish(LinearMap2.identity(), np.array([1.0, 0.0]), np.array([0.0, 1.0]), True, eps)
    if not res.certificates_strict():
        raise ConstructionError("squeeze underflowed without a certified pair")
    return res


# -- shear ------------------------------------------------------------------

@dataclass
class ShearResult:
    map: LinearMap2
    direction: np.ndarray  # certified weakly monotone for the sheared norm
    p_plus: np.ndarray
    report: MonotonicityReport

    @property
    def norm_after(self):
        return self._norm_after


def shear_for_weak_monotonicity(n, line_direction, samples=4096):
    """Shear fixing the given line so that its normal becomes weakly
    monotone.

    In the frame where the line is the x-axis: take the boundary point
    p+ on the positive axis and a supporting functional w there (the
    subdifferential midpoint); the map sending e1 to e1 and the
    supporting line direction Jw to e2 makes the supporting lines at
    +-p+ vertical. The returned map is conjugated back to the original
    frame, so it fixes the input line pointwise.
    """
    d = _unit(np.asarray(line_direction, dtype=np.float64))
    phi = math.atan2(d[1], d[0])
    rot = LinearMap2.rotation(-phi)
    rotated = LinearImageNorm(rot, n)
    p_plus = rotated.boundary_point(0.0)
    sub = rotated.subdifferential(p_plus)
    w = sub.midpoint()
    wn = math.hypot(w[0], w[1])
    if abs(w[0]) <= 1e-12 * wn:
        raise ConstructionError(
            "supporting functional is parallel to the line normal; the ball would be flat"
        )
    jw = np.array([w[1], -w[0]])  # J = [[0, 1], [-1, 0]]
    tilde = LinearMap2(np.linalg.inv(np.column_stack([np.array([1.0, 0.0]), jw])))
    amap = rot.inverted().compose(tilde).compose(rot)
    body = LinearImageNorm(amap, n)
    weak_dir = rot.inverted().apply(np.array([0.0, 1.0]))
    rep = classify_monotonicity(body, weak_dir, samples=samples)
    if rep.classification == "none":
        raise ConstructionError(
            f"shear certificate failed: min_dot={rep.min_dot:.3e} for {n!r}"
        )
    res = ShearResult(amap, weak_dir, rot.inverted().apply(p_plus), rep)
    res._norm_after = body
    return res
