"""Touching parallelograms: gauges, touch classification, graph scan.

The touching radius of a centre x against a closed set E is the largest
scaling of a fixed origin-symmetric parallelogram around x whose interior
misses E; on a point cloud it is exactly the minimum gauge over atoms.
A touch atom is a vertex contact when both side constraints are active
within tolerance, otherwise an edge contact naming the active side.

The graph scan works in a normalized frame where the parallelogram is
the square of side sqrt(2) with sides parallel to the quadrant bisectors
(vertices on the axes) and the seed contact sits at the origin below the
centre (0, 1). Sliding centres along (t, 1/2) and tracking the bottom
vertex contact traces a function whose Lipschitz constant the scan
estimates. Contact away from the tracked vertex aborts the scan: that is
the edge-contact branch of the touching dichotomy, handled elsewhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from normlab import _kernels
from normlab.errors import DichotomyViolation, TouchingError
from normlab.measures import PointMeasure

_ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])


def _atoms_of(E):
    if isinstance(E, PointMeasure):
        return E.points
    a = np.ascontiguousarray(E, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 2:
        raise TouchingError("E must be a PointMeasure or an (n, 2) array")
    return a


def _spacing_of(E):
    if isinstance(E, PointMeasure) and math.isfinite(E.spacing):
        return E.spacing
    return 0.0


@dataclass(frozen=True)
class ParallelogramSpec:
    """Origin-symmetric parallelogram with sides orthogonal to v and w.

    The gauge is max(|<y, v>|/h_v, |<y, w>|/h_w); the body is its unit
    sublevel set.
    """

    v: np.ndarray
    w: np.ndarray
    h_v: float
    h_w: float

    @classmethod
    def of(cls, v, w, h_v, h_w):
        v = np.asarray(v, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        v = v / math.hypot(v[0], v[1])
        w = w / math.hypot(w[0], w[1])
        if h_v <= 0 or h_w <= 0:
            raise TouchingError("half widths must be positive")
        if abs(v[0] * w[1] - v[1] * w[0]) < 1e-12:
            raise TouchingError("side normals must be linearly independent")
        return cls(v, w, float(h_v), float(h_w))

    @classmethod
    def unit_sides(cls, v, w, degenerate_tol=1e-6):
        """Half widths |sin(angle between v and w)| / 2, which makes every
        side have Euclidean length one."""
        v = np.asarray(v, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        v = v / math.hypot(v[0], v[1])
        w = w / math.hypot(w[0], w[1])
        s = abs(v[0] * w[1] - v[1] * w[0])
        if s < degenerate_tol:
            raise TouchingError(f"normals nearly parallel (|sin| = {s:.2e})")
        h = s / 2.0
        return cls(v, w, h, h)

    @property
    def functionals(self):
        return np.array([
            self.v / self.h_v,
            -self.v / self.h_v,
            self.w / self.h_w,
            -self.w / self.h_w,
        ])

    def gauge_batch(self, pts):
        return _kernels.max_dot(np.ascontiguousarray(pts, dtype=np.float64), self.functionals)

    def gauge(self, y):
        return float(self.gauge_batch(np.asarray(y, dtype=np.float64).reshape(1, 2))[0])

    def vertices(self):
        """Corners, counterclockwise-ish: solves <y,v> = +-h_v and
        <y,w> = +-h_w."""
        m = np.array([self.v, self.w])
        rhs = np.array([
            [self.h_v, self.h_w],
            [-self.h_v, self.h_w],
            [-self.h_v, -self.h_w],
            [self.h_v, -self.h_w],
        ])
        return rhs @ np.linalg.inv(m).T

    def normalizing_map(self):
        """Linear map sending this parallelogram onto the diamond
        {|a| + |b| <= 1} (square of side sqrt(2), bisector-parallel)."""
        m = np.array([self.v, self.w])
        d = np.diag([1.0 / self.h_v, 1.0 / self.h_w])
        u = np.array([[0.5, 0.5], [-0.5, 0.5]])
        return u @ d @ m


def touching_radius(P, x, E):
    """min over atoms of the gauge of (atom - x): the exact touching
    radius of the point cloud."""
    atoms = _atoms_of(E)
    if atoms.shape[0] == 0:
        raise TouchingError("empty set: touching radius is +inf")
    x = np.asarray(x, dtype=np.float64)
    d = float(np.min(P.gauge_batch(atoms - x)))
    if d == 0.0:
        raise TouchingError("center lies on the set")
    return d


@dataclass(frozen=True)
class TouchReport:
    center: np.ndarray
    radius: float
    touch_indices: np.ndarray
    touch_points: np.ndarray
    labels: list  # "vertex" | "edge-v" | "edge-w"
    gauges: np.ndarray
    tau: float

    @property
    def vertex_count(self):
        return sum(1 for c in self.labels if c == "vertex")

    @property
    def edge_count(self):
        return sum(1 for c in self.labels if c != "vertex")

    def vertex_only(self):
        return self.vertex_count >= 1 and self.edge_count == 0

    @property
    def primary_label(self):
        """Label of the minimal-gauge contact; the tolerance band can pick
        up extra atoms along a side, which should not decide the case."""
        return self.labels[int(np.argmin(self.gauges))]

    def contact_labels(self, tie_band=1e-9):
        """Labels of the true contacts: atoms within a relative tie band
        of the minimal gauge (as opposed to the full tolerance band)."""
        d = float(np.min(self.gauges))
        return [l for l, g in zip(self.labels, self.gauges) if g <= d * (1.0 + tie_band)]

    def contact_vertex_only(self, tie_band=1e-9):
        labels = self.contact_labels(tie_band)
        return bool(labels) and all(l == "vertex" for l in labels)


def classify_touches(P, x, E, tau=1e-6):
    """Atoms within (1 + tau) of the minimal gauge, each labelled as a
    vertex contact (both constraints active) or an edge contact on its
    active side."""
    atoms = _atoms_of(E)
    x = np.asarray(x, dtype=np.float64)
    rel = atoms - x
    g = P.gauge_batch(rel)
    d = float(np.min(g))
    if d == 0.0:
        raise TouchingError("center lies on the set")
    idx = np.flatnonzero(g <= (1.0 + tau) * d)
    av = np.abs(rel[idx] @ P.v) / P.h_v
    aw = np.abs(rel[idx] @ P.w) / P.h_w
    labels = []
    for a, b in zip(av, aw):
        if a >= (1.0 - tau) * d and b >= (1.0 - tau) * d:
            labels.append("vertex")
        elif a >= b:
            labels.append("edge-v")
        else:
            labels.append("edge-w")
    return TouchReport(x, d, idx, atoms[idx].copy(), labels, g[idx], tau)


@dataclass(frozen=True)
class GraphScan:
    ts: np.ndarray
    samples: np.ndarray          # (t_i, f(t_i)) in the normalized frame
    samples_original: np.ndarray
    radii: np.ndarray
    lipschitz: float
    containment_violations: int
    frame_matrix: np.ndarray
    frame_offset: np.ndarray
    frame_scale: float

    def csv_rows(self):
        return [
            (float(t), float(s[1]), "vertex", float(d))
            for t, s, d in zip(self.ts, self.samples, self.radii)
        ]

    def json_header(self):
        return json.dumps({
            "frame_matrix": self.frame_matrix.tolist(),
            "frame_offset": self.frame_offset.tolist(),
            "frame_scale": self.frame_scale,
            "normalized_square_side": math.sqrt(2.0),
        })


def lipschitz_graph_scan(
    P, E, seed_report, t_lo, t_hi, step,
    tau=1e-6, vertex_band=None, containment_tol=1e-9,
):
    """Track the bottom-vertex contact of sliding touching parallelograms.

    ``seed_report`` must certify a vertex-only touch; its contact point
    becomes the origin of the normalized frame and its centre sits at
    (0, 1). For each t the centre (t, 1/2) is scanned; the contact atom
    must fall within ``vertex_band`` of the parallelogram's bottom vertex
    or the scan raises DichotomyViolation naming t (an edge-interior
    contact, which belongs to the other branch of the dichotomy).

    Returns the sampled graph, its empirical Lipschitz constant, and the
    number of atoms strictly above the sampled graph (containment
    violations).
    """
    if not seed_report.contact_vertex_only():
        raise TouchingError("seed report must certify a vertex-only contact")
    atoms = _atoms_of(E)
    x0 = seed_report.center
    z0 = seed_report.touch_points[int(np.argmin(seed_report.gauges))]
    d0 = seed_report.radius

    n0 = P.normalizing_map()
    q = n0 @ (x0 - z0) / d0
    # q is a diamond vertex (+-1, 0) or (0, +-1); rotate it onto (0, 1)
    k = int(np.argmax([q @ np.array([0.0, 1.0]), q @ np.array([-1.0, 0.0]),
                       q @ np.array([0.0, -1.0]), q @ np.array([1.0, 0.0])]))
    rot = np.linalg.matrix_power(_ROT90, (4 - k) % 4) if k else np.eye(2)
    frame = rot @ n0 / d0
    offset = -frame @ z0
    pts = atoms @ frame.T + offset

    spacing = _spacing_of(E) * float(np.linalg.svd(frame, compute_uv=False)[0])
    band = vertex_band if vertex_band is not None else 2.0 * step + 2.0 * spacing + 1e-12

    ts = np.arange(t_lo, t_hi + step / 2.0, step)
    rec_t, rec_pts, rec_d = [], [], []
    ax = pts[:, 0]
    ay = pts[:, 1]
    for t in ts:
        g = np.abs(ax - t) + np.abs(ay - 0.5)
        d_t = float(np.min(g))
        touch = np.flatnonzero(g <= (1.0 + tau) * d_t)
        vertex = np.array([t, 0.5 - d_t])
        dist = np.hypot(ax[touch] - vertex[0], ay[touch] - vertex[1])
        j = int(np.argmin(dist))
        if dist[j] > band:
            raise DichotomyViolation(float(t), f"nearest contact {dist[j]:.3g} from the tracked vertex")
        rec_t.append(float(t))
        rec_pts.append(pts[touch[j]])
        rec_d.append(d_t)
    samples = np.array(rec_pts)
    radii = np.array(rec_d)
    ts_arr = np.array(rec_t)

    lip = 0.0
    for i in range(1, samples.shape[0]):
        dt = samples[i, 0] - samples[i - 1, 0]
        if abs(dt) > 1e-15:
            lip = max(lip, float(abs(samples[i, 1] - samples[i - 1, 1]) / abs(dt)))

    order = np.argsort(samples[:, 0], kind="stable")
    sx = samples[order, 0]
    sy = samples[order, 1]
    band_mask = (ax >= sx[0]) & (ax <= sx[-1])
    if np.any(band_mask) and sx[-1] > sx[0]:
        graph_at = np.interp(ax[band_mask], sx, sy)
        violations = int(np.count_nonzero(ay[band_mask] > graph_at + containment_tol))
    else:
        violations = 0

    inv = np.linalg.inv(frame)
    originals = (samples - offset) @ inv.T
    return GraphScan(ts_arr, samples, originals, radii, lip, violations, frame, offset, d0)
