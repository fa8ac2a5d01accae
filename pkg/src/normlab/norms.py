"""Planar norms: gauges, gradients, subdifferentials, polarization.

Four descriptor families are supported: the Euclidean norm, p-norms for
p in [1, inf], symmetric convex polygon gauges, and linear images
``|x|_A = |A^-1 x|`` of any of these. Descriptors are immutable and all
operations are pure, so everything here is safe for unrestricted
concurrent evaluation.

Non-differentiability happens only along finitely many rays through the
origin for these families (vertex directions for polygons, axes for p=1,
diagonals for p=inf). Gradient evaluation on a ray is policy-controlled:
``midpoint`` substitutes the midpoint of the subdifferential segment and
counts the hit, ``error`` raises.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from normlab import _kernels
from normlab.errors import InvalidDescriptorError, RayError

TWO_PI = 2.0 * math.pi

# module-level tally of midpoint-surrogate gradient evaluations
_RAY_SURROGATE_COUNT = 0


def ray_surrogate_count():
    return _RAY_SURROGATE_COUNT


def reset_ray_surrogate_count():
    global _RAY_SURROGATE_COUNT
    _RAY_SURROGATE_COUNT = 0


def _count_ray_surrogates(k):
    global _RAY_SURROGATE_COUNT
    _RAY_SURROGATE_COUNT += int(k)


def _as_point(x):
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (2,):
        raise ValueError(f"expected a 2D point, got shape {a.shape}")
    return a


def _as_points(pts):
    a = np.ascontiguousarray(pts, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, 2)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array, got shape {a.shape}")
    return a


def _wrap_angle(a):
    """Wrap angles into [0, 2*pi)."""
    return np.mod(a, TWO_PI)


def angular_distance(a, b):
    """Smallest absolute angle between directions a and b (radians)."""
    d = np.abs(_wrap_angle(np.asarray(a) - np.asarray(b)))
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True)
class Subdifferential:
    """Segment of subgradients at a nonzero point.

    ``v_minus`` is the one-sided gradient limit from the clockwise side,
    ``v_plus`` from the counterclockwise side; they coincide (and
    ``degenerate`` is True) at regular points.
    """

    v_minus: np.ndarray
    v_plus: np.ndarray
    degenerate: bool

    @property
    def endpoints(self):
        return np.array([self.v_minus, self.v_plus])

    def midpoint(self):
        return 0.5 * (self.v_minus + self.v_plus)

    def min_dot(self, direction):
        """Infimum of <v, direction> over the segment (at an endpoint)."""
        d = np.asarray(direction, dtype=np.float64)
        return min(float(self.v_minus @ d), float(self.v_plus @ d))


class OriginSubdifferential:
    """Marker for the subdifferential at the origin: the whole dual unit
    ball, not a segment."""

    def __repr__(self):
        return "OriginSubdifferential()"


class Norm:
    """Base class for planar norm descriptors."""

    kind = "abstract"

    # -- core evaluation -------------------------------------------------
    def value_batch(self, pts):
        raise NotImplementedError

    def value(self, x):
        return float(self.value_batch(_as_point(x).reshape(1, 2))[0])

    def gradient_batch(self, pts, ray_policy="midpoint", ray_tol=1e-9):
        """Gradients of the norm (0-homogeneous) at the given points.

        Returns ``(grads, ray_count)``. Points on non-differentiability
        rays get the subdifferential midpoint under the ``midpoint``
        policy; the ``error`` policy raises RayError. The origin is left
        as a zero gradient and not counted.
        """
        pts = _as_points(pts)
        grads, mask = self._gradient_impl(pts, ray_tol)
        k = int(np.count_nonzero(mask))
        if k and ray_policy == "error":
            idx = int(np.flatnonzero(mask)[0])
            raise RayError(f"gradient requested on a ray, e.g. point {pts[idx]}")
        if k:
            _count_ray_surrogates(k)
        return grads, k

    def gradient(self, x, ray_policy="midpoint", ray_tol=1e-9):
        g, _ = self.gradient_batch(_as_point(x).reshape(1, 2), ray_policy, ray_tol)
        return g[0]

    def _gradient_impl(self, pts, ray_tol):
        """Return (gradients, on_ray_mask); midpoint surrogate already
        applied on the masked rows."""
        raise NotImplementedError

    def subdifferential(self, x, tol=1e-12):
        x = _as_point(x)
        if x[0] == 0.0 and x[1] == 0.0:
            return OriginSubdifferential()
        return self._subdifferential_impl(x, tol)

    def _subdifferential_impl(self, x, tol):
        raise NotImplementedError

    # -- structure -------------------------------------------------------
    def ray_angles(self):
        """Directions (angles in [0, 2*pi), sorted) where the norm is not
        differentiable; empty for smooth norms."""
        return np.empty(0, dtype=np.float64)

    def feature_angles(self):
        """Ray angles plus per-family landmark directions (edge midpoints
        for polytopal balls); sampling grids include these exactly."""
        return self.ray_angles()

    def on_ray_mask(self, pts, ray_tol=1e-9):
        """Boolean mask of points within angular ray_tol of some ray."""
        pts = _as_points(pts)
        rays = self.ray_angles()
        mask = np.zeros(pts.shape[0], dtype=bool)
        if rays.size == 0:
            return mask
        ang = np.arctan2(pts[:, 1], pts[:, 0])
        nz = (pts[:, 0] != 0.0) | (pts[:, 1] != 0.0)
        for r in rays:
            mask |= nz & (angular_distance(ang, r) <= ray_tol)
        return mask

    # -- metric constants ------------------------------------------------
    @property
    def circumscribed_radius(self):
        """max |x|_2 over the unit sphere of this norm (upper bound where
        no closed form exists); Euclidean prefilters scale by this."""
        r = getattr(self, "_cmax", None)
        if r is None:
            r = self._circumscribed_radius_impl()
            self._cmax = r
        return r

    def _circumscribed_radius_impl(self):
        raise NotImplementedError

    def unit_ball_area(self):
        raise NotImplementedError

    # -- boundary --------------------------------------------------------
    def boundary_batch(self, thetas):
        """Unit-sphere points of this norm in the given directions."""
        t = np.asarray(thetas, dtype=np.float64)
        dirs = np.column_stack([np.cos(t), np.sin(t)])
        vals = self.value_batch(dirs)
        return dirs / vals[:, None]

    def boundary_point(self, theta):
        return self.boundary_batch(np.array([theta]))[0]

    # -- serialization ---------------------------------------------------
    def to_dict(self):
        raise NotImplementedError

    def to_json(self):
        return json.dumps(self.to_dict())

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class EuclideanNorm(Norm):
    kind = "euclidean"

    def value_batch(self, pts):
        return _kernels.lp_gauge(_as_points(pts), 2.0)

    def _gradient_impl(self, pts, ray_tol):
        v = np.hypot(pts[:, 0], pts[:, 1])
        grads = np.zeros_like(pts)
        nz = v > 0.0
        grads[nz] = pts[nz] / v[nz, None]
        return grads, np.zeros(pts.shape[0], dtype=bool)

    def _subdifferential_impl(self, x, tol):
        g = x / np.hypot(x[0], x[1])
        return Subdifferential(g, g.copy(), True)

    def _circumscribed_radius_impl(self):
        return 1.0

    def unit_ball_area(self):
        return math.pi

    def to_dict(self):
        return {"kind": "euclidean"}


class LpNorm(Norm):
    """p-norm for p in [1, inf]; p = inf is stored as math.inf."""

    kind = "lp"

    def __init__(self, p):
        if p == "inf":
            p = math.inf
        p = float(p)
        if not p >= 1.0:
            raise InvalidDescriptorError(f"lp norm requires p >= 1, got {p}")
        self.p = p

    def value_batch(self, pts):
        return _kernels.lp_gauge(_as_points(pts), self.p)

    def _gradient_impl(self, pts, ray_tol):
        p = self.p
        n = pts.shape[0]
        mask = np.zeros(n, dtype=bool)
        grads = np.zeros_like(pts)
        ax = np.abs(pts[:, 0])
        ay = np.abs(pts[:, 1])
        nz = (ax > 0.0) | (ay > 0.0)
        if p == 1.0:
            big = np.maximum(ax, ay)
            mask = nz & (np.minimum(ax, ay) <= math.tan(ray_tol) * big)
            grads = np.sign(pts)
            # points inside the ray band but not exactly on the axis get
            # the segment midpoint, not the one-sided sign
            if np.any(mask):
                xbig = mask & (ax >= ay)
                grads[xbig] = np.column_stack([np.sign(pts[xbig, 0]), np.zeros(np.count_nonzero(xbig))])
                ysel = mask & (ax < ay)
                grads[ysel] = np.column_stack([np.zeros(np.count_nonzero(ysel)), np.sign(pts[ysel, 1])])
        elif p == math.inf:
            mask = nz & (np.abs(ax - ay) <= math.tan(ray_tol) * np.maximum(ax, ay))
            xbig = ax > ay
            grads[xbig, 0] = np.sign(pts[xbig, 0])
            grads[~xbig, 1] = np.sign(pts[~xbig, 1])
            mid = mask & nz
            grads[mid] = 0.5 * np.sign(pts[mid])
        elif p == 2.0:
            v = np.hypot(pts[:, 0], pts[:, 1])
            grads[nz] = pts[nz] / v[nz, None]
        else:
            v = _kernels.lp_gauge(pts, p)
            r = np.zeros_like(pts)
            r[nz] = np.abs(pts[nz]) / v[nz, None]
            grads[nz] = np.sign(pts[nz]) * r[nz] ** (p - 1.0)
        return grads, mask

    def _subdifferential_impl(self, x, tol):
        p = self.p
        ax, ay = abs(x[0]), abs(x[1])
        if p == 1.0 and min(ax, ay) <= tol * max(ax, ay):
            # at (t, 0), t > 0 the segment runs from (1, -1) to (1, 1);
            # endpoints ordered by the side of approach (clockwise first)
            if ax >= ay:
                s = math.copysign(1.0, x[0])
                return Subdifferential(np.array([s, -s]), np.array([s, s]), False)
            s = math.copysign(1.0, x[1])
            return Subdifferential(np.array([s, s]), np.array([-s, s]), False)
        if p == math.inf and abs(ax - ay) <= tol * max(ax, ay):
            sx = math.copysign(1.0, x[0])
            sy = math.copysign(1.0, x[1])
            ex = np.array([sx, 0.0])
            ey = np.array([0.0, sy])
            # counterclockwise sweep passes ex before ey in quadrants 1, 3
            if sx * sy > 0:
                return Subdifferential(ex, ey, False)
            return Subdifferential(ey, ex, False)
        g = self.gradient(x)
        return Subdifferential(g, g.copy(), True)

    def ray_angles(self):
        if self.p == 1.0:
            return np.array([0.0, 0.5, 1.0, 1.5]) * math.pi
        if self.p == math.inf:
            return np.array([0.25, 0.75, 1.25, 1.75]) * math.pi
        return np.empty(0, dtype=np.float64)

    def feature_angles(self):
        if self.p in (1.0, math.inf):
            return np.sort(np.arange(8) * (math.pi / 4.0))
        return self.ray_angles()

    def _circumscribed_radius_impl(self):
        if self.p <= 2.0:
            return 1.0
        if self.p == math.inf:
            return math.sqrt(2.0)
        return 2.0 ** (0.5 - 1.0 / self.p)

    def unit_ball_area(self):
        if self.p == math.inf:
            return 4.0
        return 4.0 * math.gamma(1.0 + 1.0 / self.p) ** 2 / math.gamma(1.0 + 2.0 / self.p)

    def to_dict(self):
        return {"kind": "lp", "p": "inf" if self.p == math.inf else self.p}


class PolygonNorm(Norm):
    """Gauge of an origin-symmetric strictly convex polygon.

    Vertices are stored counterclockwise with the antipodal pairing
    ``verts[k + m/2] == -verts[k]``. The gauge is the max over edge
    functionals u_k, where <u_k, x> = 1 on edge k; gradients and
    subdifferentials are exact (active functional on an edge cone,
    adjacent pair at a vertex direction).
    """

    kind = "polygon"

    def __init__(self, vertices):
        verts = _as_points(vertices).copy()
        m = verts.shape[0]
        if m < 4 or m % 2 != 0:
            raise InvalidDescriptorError("polygon needs an even vertex count >= 4")
        scale = float(np.max(np.abs(verts)))
        mismatch = float(np.max(np.abs(verts[m // 2 :] + verts[: m // 2])))
        if mismatch > 1e-9 * scale:
            raise InvalidDescriptorError("vertices must pair antipodally: v[k+m/2] == -v[k]")
        # make the pairing exact so gauge symmetry holds to the last ulp
        verts[m // 2 :] = -verts[: m // 2]
        nxt = np.roll(verts, -1, axis=0)
        cross_origin = verts[:, 0] * nxt[:, 1] - verts[:, 1] * nxt[:, 0]
        if np.any(cross_origin <= 0.0):
            raise InvalidDescriptorError("vertices must wind counterclockwise around an interior origin")
        edge = nxt - verts
        turn = edge[:, 0] * np.roll(edge, -1, axis=0)[:, 1] - edge[:, 1] * np.roll(edge, -1, axis=0)[:, 0]
        if np.any(turn <= 0.0):
            raise InvalidDescriptorError("polygon must be strictly convex (no collinear vertices)")
        # functional of edge k solves <u, v_k> = <u, v_{k+1}> = 1
        self.vertices = verts
        self.vertices.setflags(write=False)
        u = np.column_stack([nxt[:, 1] - verts[:, 1], verts[:, 0] - nxt[:, 0]]) / cross_origin[:, None]
        self.functionals = u
        self.functionals.setflags(write=False)
        self._vertex_angles = _wrap_angle(np.arctan2(verts[:, 1], verts[:, 0]))

    @classmethod
    def from_vertices(cls, vertices, symmetrize=False):
        """Build a polygon norm, optionally applying antipodal closure and
        a convex hull to arbitrary input points."""
        verts = _as_points(vertices)
        if symmetrize:
            from scipy.spatial import ConvexHull

            pts = np.vstack([verts, -verts])
            hull = ConvexHull(pts)
            verts = pts[hull.vertices]  # counterclockwise by qhull convention
        order = np.argsort(_wrap_angle(np.arctan2(verts[:, 1], verts[:, 0])))
        return cls(verts[order])

    def value_batch(self, pts):
        return _kernels.max_dot(_as_points(pts), self.functionals)

    def _active_data(self, pts):
        dots = _as_points(pts) @ self.functionals.T
        vals = dots.max(axis=1)
        kmax = dots.argmax(axis=1)
        return dots, vals, kmax

    def _gradient_impl(self, pts, ray_tol):
        dots, vals, kmax = self._active_data(pts)
        grads = self.functionals[kmax].copy()
        nz = vals > 0.0
        grads[~nz] = 0.0
        # a second functional active within tolerance marks a vertex cone
        second = np.partition(dots, -2, axis=1)[:, -2]
        mask = nz & (vals - second <= ray_tol * np.maximum(vals, 1e-300))
        if np.any(mask):
            idx = np.flatnonzero(mask)
            for i in idx:
                sub = self._subdifferential_impl(pts[i], ray_tol)
                grads[i] = sub.midpoint()
        return grads, mask

    def _subdifferential_impl(self, x, tol):
        dots = self.functionals @ x
        val = dots.max()
        active = np.flatnonzero(dots >= val - tol * max(val, 1e-300))
        if active.size == 1:
            u = self.functionals[active[0]].copy()
            return Subdifferential(u, u.copy(), True)
        m = self.functionals.shape[0]
        ks = set(int(k) for k in active)
        for k in ks:
            if (k + 1) % m in ks:
                return Subdifferential(
                    self.functionals[k].copy(),
                    self.functionals[(k + 1) % m].copy(),
                    False,
                )
        raise InvalidDescriptorError("non-adjacent active edges; polygon is degenerate")

    def ray_angles(self):
        return np.sort(self._vertex_angles)

    def feature_angles(self):
        mids = []
        m = self.vertices.shape[0]
        for k in range(m):
            mid = 0.5 * (self.vertices[k] + self.vertices[(k + 1) % m])
            mids.append(math.atan2(mid[1], mid[0]))
        return np.sort(np.concatenate([self._vertex_angles, _wrap_angle(np.array(mids))]))

    def _circumscribed_radius_impl(self):
        return float(np.max(np.hypot(self.vertices[:, 0], self.vertices[:, 1])))

    def unit_ball_area(self):
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * nxt[:, 1] - v[:, 1] * nxt[:, 0]))

    def to_dict(self):
        return {"kind": "polygon", "vertices": self.vertices.tolist()}


class LinearImageNorm(Norm):
    """|x|_A = |A^-1 x| for an invertible A and an inner norm; the unit
    ball is A applied to the inner ball."""

    kind = "linear_image"

    def __init__(self, map2, inner):
        from normlab.geometry import LinearMap2

        if not isinstance(map2, LinearMap2):
            map2 = LinearMap2(np.asarray(map2, dtype=np.float64))
        self.map = map2
        self.inner = inner

    def value_batch(self, pts):
        return self.inner.value_batch(self.map.inverse_apply(_as_points(pts)))

    def _gradient_impl(self, pts, ray_tol):
        inner_pts = self.map.inverse_apply(pts)
        grads, mask = self.inner._gradient_impl(inner_pts, ray_tol)
        return grads @ self.map.inverse, mask

    def _subdifferential_impl(self, x, tol):
        sub = self.inner.subdifferential(self.map.inverse_apply(x.reshape(1, 2))[0], tol)
        invT = self.map.inverse.T
        return Subdifferential(invT @ sub.v_minus, invT @ sub.v_plus, sub.degenerate)

    def ray_angles(self):
        inner_rays = self.inner.ray_angles()
        if inner_rays.size == 0:
            return inner_rays
        dirs = np.column_stack([np.cos(inner_rays), np.sin(inner_rays)])
        img = self.map.apply(dirs)
        return np.sort(_wrap_angle(np.arctan2(img[:, 1], img[:, 0])))

    def feature_angles(self):
        inner_f = self.inner.feature_angles()
        if inner_f.size == 0:
            return inner_f
        dirs = np.column_stack([np.cos(inner_f), np.sin(inner_f)])
        img = self.map.apply(dirs)
        return np.sort(_wrap_angle(np.arctan2(img[:, 1], img[:, 0])))

    def _circumscribed_radius_impl(self):
        # operator norm times the inner constant: a safe upper bound
        smax = float(np.linalg.svd(self.map.matrix, compute_uv=False)[0])
        return smax * self.inner.circumscribed_radius

    def unit_ball_area(self):
        return abs(self.map.determinant) * self.inner.unit_ball_area()

    def to_dict(self):
        return {
            "kind": "linear_image",
            "map": self.map.matrix.tolist(),
            "inner": self.inner.to_dict(),
        }


# -- factory helpers -----------------------------------------------------

def euclidean():
    return EuclideanNorm()


def lp(p):
    return LpNorm(p)


def polygon(vertices, symmetrize=False):
    return PolygonNorm.from_vertices(vertices, symmetrize=symmetrize)


def linear_image(map2, inner):
    return LinearImageNorm(map2, inner)


def square_norm():
    """The max norm as an explicit polygon (unit square ball)."""
    return PolygonNorm(np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]))


def random_polygon(seed, half_vertices=6, aspect_range=(0.6, 1.8)):
    """Seeded random polygon norm: points on a random ellipse, symmetrized
    and convexified. Aspect ratios are kept moderate so the resulting
    gauges stay well conditioned."""
    rng = np.random.default_rng(seed)
    k = int(half_vertices)
    # guard against angular near-duplicates that would produce slivers;
    # the threshold shrinks with the vertex count so resampling terminates
    gap = 0.08 if k <= 8 else math.pi / (8.0 * k)
    thetas = np.sort(rng.uniform(0.0, math.pi, size=k))
    while np.min(np.diff(np.concatenate([thetas, [thetas[0] + math.pi]]))) < gap:
        thetas = np.sort(rng.uniform(0.0, math.pi, size=k))
    a = rng.uniform(*aspect_range)
    phi = rng.uniform(0.0, math.pi)
    c, s = math.cos(phi), math.sin(phi)
    ellipse = np.column_stack([a * np.cos(thetas), np.sin(thetas)])
    pts = ellipse @ np.array([[c, s], [-s, c]])
    return PolygonNorm.from_vertices(pts, symmetrize=True)


def from_dict(d):
    """Descriptor from its JSON dictionary form."""
    kind = d.get("kind")
    if kind == "euclidean":
        return EuclideanNorm()
    if kind == "lp":
        return LpNorm(d["p"])
    if kind == "polygon":
        return PolygonNorm.from_vertices(np.asarray(d["vertices"], dtype=np.float64), symmetrize=True)
    if kind == "linear_image":
        return LinearImageNorm(np.asarray(d["map"], dtype=np.float64), from_dict(d["inner"]))
    raise InvalidDescriptorError(f"unknown norm kind {kind!r}")


def from_json(text):
    return from_dict(json.loads(text))


# -- derived quantities ----------------------------------------------------

def eval_norm(n, x):
    """Norm value at a point."""
    return n.value(x)


def grad_norm_sq(n, x, ray_policy="midpoint", ray_tol=1e-9):
    """Gradient of the squared norm: 2 |x| grad|.|(x), zero at the origin."""
    x = _as_point(x)
    if x[0] == 0.0 and x[1] == 0.0:
        return np.zeros(2)
    g, _ = n.gradient_batch(x.reshape(1, 2), ray_policy, ray_tol)
    return 2.0 * n.value(x) * g[0]


def grad_norm_sq_batch(n, pts, ray_policy="midpoint", ray_tol=1e-9):
    """Batch gradient of the squared norm; returns (grads, ray_count)."""
    pts = _as_points(pts)
    g, k = n.gradient_batch(pts, ray_policy, ray_tol)
    vals = n.value_batch(pts)
    return 2.0 * vals[:, None] * g, k


def polarization(n, z, y):
    """(|z|^2 + |y|^2 - |z - y|^2) / 2; the inner product for the
    Euclidean norm, its surrogate otherwise."""
    z = _as_point(z)
    y = _as_point(y)
    nz = n.value(z)
    ny = n.value(y)
    nd = n.value(z - y)
    return 0.5 * (nz * nz + ny * ny - nd * nd)


def polarization_batch(n, zs, y):
    zs = _as_points(zs)
    y = _as_point(y)
    vz = n.value_batch(zs)
    ny = n.value(y)
    vd = n.value_batch(zs - y[None, :])
    return 0.5 * (vz * vz + ny * ny - vd * vd)


def taylor_remainder(n, z, y, ray_policy="midpoint"):
    """|z - y|^2 - |z|^2 + <grad|.|^2(z), y>; o(|y|) as y -> 0 at points
    of differentiability."""
    z = _as_point(z)
    y = _as_point(y)
    nd = n.value(z - y)
    nz = n.value(z)
    g = grad_norm_sq(n, z, ray_policy=ray_policy)
    return nd * nd - nz * nz + float(g @ y)


def non_differentiability_rays(n):
    """Angles (sorted, in [0, 2*pi)) of the rays where the norm is not
    differentiable."""
    return n.ray_angles()
