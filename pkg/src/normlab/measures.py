"""Weighted point clouds standing in for planar Radon measures.

Generators produce clouds with known scaling behaviour (area patches,
length measures on segments, self-similar iterated-function-system
measures); queries are closed-ball masses under any norm descriptor,
accelerated by a uniform grid index with an exact filter pass. Blow-ups
are single-scale rescalings of the cloud: no weak-* limit is taken and
none is claimed (provenance records this).

Closed balls are used everywhere so that atoms landing exactly on a
sphere are handled deterministically; oracle computations in the tests
assume this convention.

PointMeasure instances are immutable after construction; all queries are
pure and safe to run concurrently. Index construction is lazy and
single-threaded.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from normlab import _kernels
from normlab.errors import AtomBudgetError, MeasureError
from normlab.geometry import LinearMap2

_MAGIC = b"PMSR1"
_ATOM_BUDGET = 1 << 24


class GridIndex:
    """Uniform-bucket spatial index over 2D points.

    ``query_box`` returns exactly the indices of points inside a closed
    axis-aligned box, in ascending order (candidate cells are gathered,
    then filtered exactly).
    """

    def __init__(self, points, cell_size=None):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        self.points = pts
        n = max(pts.shape[0], 1)
        lo = pts.min(axis=0) if pts.size else np.zeros(2)
        hi = pts.max(axis=0) if pts.size else np.zeros(2)
        diag = math.hypot(hi[0] - lo[0], hi[1] - lo[1])
        if cell_size is None:
            if diag == 0.0:
                cell_size = 1.0
            else:
                cell_size = min(max(diag / math.sqrt(n), diag / 2048.0), diag / 4.0)
        self.origin = lo
        self.cell = float(cell_size)
        if pts.size:
            cells = np.floor((pts - lo) / self.cell).astype(np.int64)
        else:
            cells = np.zeros((0, 2), dtype=np.int64)
        self._cmin = cells.min(axis=0) if pts.size else np.zeros(2, dtype=np.int64)
        self._cmax = cells.max(axis=0) if pts.size else np.zeros(2, dtype=np.int64)
        self._stride = int(self._cmax[1] - self._cmin[1]) + 2
        keys = (cells[:, 0] - self._cmin[0]) * self._stride + (cells[:, 1] - self._cmin[1])
        self._order = np.argsort(keys, kind="stable").astype(np.int64)
        self._keys = keys[self._order]

    def query_box(self, lo, hi):
        if self.points.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        c0 = np.floor((lo - self.origin) / self.cell).astype(np.int64)
        c1 = np.floor((hi - self.origin) / self.cell).astype(np.int64)
        ix0 = max(int(c0[0]), int(self._cmin[0])) - int(self._cmin[0])
        ix1 = min(int(c1[0]), int(self._cmax[0])) - int(self._cmin[0])
        iy0 = max(int(c0[1]), int(self._cmin[1])) - int(self._cmin[1])
        iy1 = min(int(c1[1]), int(self._cmax[1])) - int(self._cmin[1])
        if ix1 < ix0 or iy1 < iy0:
            return np.empty(0, dtype=np.int64)
        chunks = []
        for ix in range(ix0, ix1 + 1):
            s = np.searchsorted(self._keys, ix * self._stride + iy0, side="left")
            e = np.searchsorted(self._keys, ix * self._stride + iy1, side="right")
            if e > s:
                chunks.append(self._order[s:e])
        if not chunks:
            return np.empty(0, dtype=np.int64)
        cand = np.concatenate(chunks)
        p = self.points[cand]
        ok = (p[:, 0] >= lo[0]) & (p[:, 0] <= hi[0]) & (p[:, 1] >= lo[1]) & (p[:, 1] <= hi[1])
        return np.sort(cand[ok])


class PointMeasure:
    """Immutable weighted point cloud with a lazy spatial index."""

    def __init__(self, points, weights, provenance=None, spacing=None):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        w = np.ascontiguousarray(weights, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise MeasureError(f"points must be (n, 2), got {pts.shape}")
        if w.shape != (pts.shape[0],):
            raise MeasureError("weights length must match points")
        if pts.shape[0] and (not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w))):
            raise MeasureError("points and weights must be finite")
        if pts.shape[0] and not np.all(w > 0.0):
            raise MeasureError("weights must be strictly positive")
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w
        self.total_mass = _kernels.comp_sum(w)
        self.provenance = dict(provenance or {})
        self._spacing = spacing
        self._index = None

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def index(self):
        if self._index is None:
            self._index = GridIndex(self.points)
        return self._index

    def bbox(self):
        if self.size == 0:
            return np.zeros(2), np.zeros(2)
        return self.points.min(axis=0), self.points.max(axis=0)

    @property
    def spacing(self):
        """Estimated atom spacing; generators record it, otherwise a
        nearest-neighbour median over a subsample is computed once."""
        if self._spacing is None:
            from scipy.spatial import cKDTree

            if self.size < 2:
                self._spacing = math.inf
            else:
                sample = self.points[:: max(self.size // 2048, 1)]
                d, _ = cKDTree(self.points).query(sample, k=2)
                self._spacing = float(np.median(d[:, 1]))
        return self._spacing

    def trusted_window(self):
        """(r_lo, r_hi): radii below 10 atom spacings or above a quarter
        of the support diameter are resolution artifacts."""
        lo, hi = self.bbox()
        diag = math.hypot(hi[0] - lo[0], hi[1] - lo[1])
        return 10.0 * self.spacing, diag / 4.0

    def with_weights(self, factor, note=None):
        """Rescaled copy (weights multiplied by a positive factor)."""
        if factor <= 0:
            raise MeasureError("weight factor must be positive")
        prov = dict(self.provenance)
        if note:
            prov["rescaled"] = note
        return PointMeasure(self.points, self.weights * factor, prov, self._spacing)

    def __repr__(self):
        kind = self.provenance.get("kind", "raw")
        return f"PointMeasure({self.size} atoms, mass={self.total_mass:.6g}, kind={kind})"


# -- queries ----------------------------------------------------------------

def ball_mass(mu, n, x, r):
    """Mass of the closed ball of radius r around x in the norm ``n``.

    The grid index is queried with the norm's circumscribing Euclidean
    box, then membership is decided exactly on the candidates.
    """
    if r <= 0:
        raise MeasureError("radius must be positive")
    x = np.asarray(x, dtype=np.float64)
    reach = r * n.circumscribed_radius
    cand = mu.index.query_box(x - reach, x + reach)
    if cand.size == 0:
        return 0.0
    vals = n.value_batch(mu.points[cand] - x)
    inside = cand[vals <= r]
    if inside.size == 0:
        return 0.0
    return _kernels.comp_sum(mu.weights[inside])


def ball_mass_bruteforce(mu, n, x, r):
    """Reference linear scan; identical atom order as ball_mass so the
    two agree exactly."""
    x = np.asarray(x, dtype=np.float64)
    vals = n.value_batch(mu.points - x)
    inside = vals <= r
    return _kernels.comp_sum(mu.weights[inside])


def ball_atoms(mu, n, x, r):
    """Indices (ascending) of atoms in the closed ball."""
    x = np.asarray(x, dtype=np.float64)
    reach = r * n.circumscribed_radius
    cand = mu.index.query_box(x - reach, x + reach)
    if cand.size == 0:
        return cand
    vals = n.value_batch(mu.points[cand] - x)
    return cand[vals <= r]


# -- generators ---------------------------------------------------------------

def _parse_rect(rect):
    r = np.asarray(rect, dtype=np.float64).reshape(4)
    x0, y0, x1, y1 = r
    if not (x1 > x0 and y1 > y0):
        raise MeasureError(f"degenerate rectangle {r.tolist()}")
    return x0, y0, x1, y1


def gen_lebesgue(rect, n_samples, seed):
    """Monte Carlo area measure: n i.i.d. uniform samples on the
    rectangle, each carrying weight area / n. Deterministic per seed."""
    x0, y0, x1, y1 = _parse_rect(rect)
    n = int(n_samples)
    if n < 1:
        raise MeasureError("need at least one sample")
    rng = np.random.default_rng(seed)
    pts = rng.uniform((x0, y0), (x1, y1), size=(n, 2))
    area = (x1 - x0) * (y1 - y0)
    w = np.full(n, area / n)
    prov = {"kind": "lebesgue", "rect": [x0, y0, x1, y1], "n": n, "seed": int(seed)}
    return PointMeasure(pts, w, prov, spacing=math.sqrt(area / n))


def gen_lebesgue_grid(rect, n_atoms):
    """Deterministic area measure: a regular lattice of cell centres,
    each atom weighted by its cell area. Preferred whenever Monte Carlo
    noise would mask the effect under study (the lattice's ball-count
    error decays like a boundary term instead of n^-1/2)."""
    x0, y0, x1, y1 = _parse_rect(rect)
    w_side, h_side = x1 - x0, y1 - y0
    n = int(n_atoms)
    if n < 1:
        raise MeasureError("need at least one atom")
    nx = max(int(round(math.sqrt(n * w_side / h_side))), 1)
    ny = max(int(round(n / nx)), 1)
    xs = x0 + (np.arange(nx) + 0.5) * (w_side / nx)
    ys = y0 + (np.arange(ny) + 0.5) * (h_side / ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    w = np.full(nx * ny, (w_side / nx) * (h_side / ny))
    prov = {"kind": "lebesgue_grid", "rect": [x0, y0, x1, y1], "nx": nx, "ny": ny}
    return PointMeasure(pts, w, prov, spacing=max(w_side / nx, h_side / ny))


def gen_segment(direction, half_length, spacing, normalize=None):
    """Length measure on the segment {t * u : |t| <= L}.

    Atoms sit on the symmetric grid t in {-Kh, ..., 0, ..., Kh} with raw
    weight h each (so raw ball masses approximate Euclidean length).
    Passing a norm descriptor as ``normalize`` rescales weights by
    |u|_norm / 2, which makes the measure exactly 1-uniform for that
    norm at interior centres.
    """
    u = np.asarray(direction, dtype=np.float64)
    u = u / math.hypot(u[0], u[1])
    L, h = float(half_length), float(spacing)
    if h > L / 10.0:
        raise MeasureError("spacing must be at most one tenth of the half length")
    k = int(math.floor(L / h))
    t = np.arange(-k, k + 1, dtype=np.float64) * h
    pts = t[:, None] * u[None, :]
    w = np.full(t.size, h)
    prov = {"kind": "segment", "direction": u.tolist(), "half_length": L, "spacing": h}
    if normalize is not None and normalize != "raw":
        scale = normalize.value(u) / 2.0
        w = w * scale
        prov["normalized"] = normalize.to_dict()
    return PointMeasure(pts, w, prov, spacing=h)


@dataclass(frozen=True)
class IfsSpec:
    """Contracting similarities (scale, translation) with selection
    probabilities and an iteration depth."""

    scales: tuple
    translations: tuple
    probabilities: tuple
    depth: int

    def __post_init__(self):
        m = len(self.scales)
        if m < 2 or len(self.translations) != m or len(self.probabilities) != m:
            raise MeasureError("need matching scales/translations/probabilities, at least two maps")
        if any(not (0.0 < s < 1.0) for s in self.scales):
            raise MeasureError("scales must lie in (0, 1)")
        p = np.asarray(self.probabilities, dtype=np.float64)
        if np.any(p <= 0.0) or abs(p.sum() - 1.0) > 1e-12:
            raise MeasureError("probabilities must be positive and sum to 1")
        if self.depth < 1:
            raise MeasureError("depth must be at least 1")
        if m**self.depth > _ATOM_BUDGET:
            raise AtomBudgetError(f"{m}^{self.depth} atoms exceeds the {_ATOM_BUDGET} budget")

    def similarity_dimension(self):
        """Solves sum scale_i^s = 1 (bisection)."""
        s_lo, s_hi = 0.0, 10.0
        for _ in range(200):
            s = 0.5 * (s_lo + s_hi)
            if sum(sc**s for sc in self.scales) > 1.0:
                s_lo = s
            else:
                s_hi = s
        return 0.5 * (s_lo + s_hi)


def gen_ifs(spec):
    """One atom per depth-level cylinder, placed at the cylinder's fixed
    corner S_{w_1..w_{d-1}}(fix(S_{w_d})); the atom weight is the product
    of the word's probabilities.

    When every scale equals 1/q for one integer q, positions are
    accumulated in integer coordinates over q^(depth-1) and divided once,
    so ball masses at radii commensurate with the cell tree are exact at
    the ulp level.
    """
    m = len(spec.scales)
    lam = np.asarray(spec.scales, dtype=np.float64)
    trans = np.asarray(spec.translations, dtype=np.float64).reshape(m, 2)
    probs = np.asarray(spec.probabilities, dtype=np.float64)
    d = spec.depth

    qs = 1.0 / lam
    q = int(round(qs[0]))
    exact = bool(np.all(np.abs(qs - q) < 1e-12)) and q >= 2
    # fixed point of S_i: t_i / (1 - scale_i)
    fixed = trans / (1.0 - lam)[:, None]

    denom = None
    if exact:
        denom = (q - 1) * q ** (d - 1)
        if denom * max(1.0, float(np.max(np.abs(fixed)))) > 2**52:
            exact = False
    if exact:
        # work in units of (q-1) * q^(depth-1): seeds become fix*(q-1)
        # and applying map i adds (q-1)^2 * q^(j-1) * fix_i, both integral
        # whenever fix*(q-1) is
        w0 = fixed * (q - 1)
        w0_int = np.round(w0).astype(np.int64)
        if not np.all(np.abs(w0 - w0_int) < 1e-12):
            exact = False
    if exact:
        u = w0_int.copy()
        w = probs.copy()
        inc_base = (q - 1) * w0_int
        for j in range(1, d):
            step = q ** (j - 1)
            parts = [u + step * inc_base[i] for i in range(m)]
            u = np.concatenate(parts, axis=0)
            w = np.concatenate([probs[i] * w for i in range(m)])
        pts = u.astype(np.float64) / float(denom)
    else:
        pts = fixed.copy()
        w = probs.copy()
        for _ in range(1, d):
            parts = [lam[i] * pts + trans[i] for i in range(m)]
            pts = np.concatenate(parts, axis=0)
            w = np.concatenate([probs[i] * w for i in range(m)])

    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    diam = math.hypot(hi[0] - lo[0], hi[1] - lo[1])
    spacing = diam * float(np.max(lam)) ** (d - 1) / 2.0
    prov = {
        "kind": "ifs",
        "maps": [{"scale": float(s), "translation": list(map(float, t))} for s, t in zip(spec.scales, spec.translations)],
        "probabilities": list(map(float, spec.probabilities)),
        "depth": d,
        "exact_grid": bool(exact),
    }
    if exact:
        prov["grid_base"] = q
        prov["grid_denominator"] = denom
    return PointMeasure(pts, w, prov, spacing=spacing)


def ifs_exact_radius(mu, level, multiple=1):
    """Radius ``multiple * q**(-level)`` rounded exactly like the atom
    coordinates of an exact-grid IFS measure, so closed-ball membership
    comparisons reproduce the cylinder tree's integer arithmetic."""
    prov = mu.provenance
    if not prov.get("exact_grid"):
        raise MeasureError("measure does not carry an exact cylinder grid")
    q = prov["grid_base"]
    denom = prov["grid_denominator"]
    d = prov["depth"]
    if level > d - 1:
        raise MeasureError("level finer than the atom grid")
    return float(multiple * (q - 1) * q ** (d - 1 - level)) / float(denom)


def four_corner_spec(depth, ratio=1.0 / 3.0, probabilities=None):
    """Four contractions fixing the corners of the unit square; at the
    default ratio 1/3 the similarity dimension is log 4 / log 3."""
    corners = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0))
    trans = tuple((c[0] * (1.0 - ratio), c[1] * (1.0 - ratio)) for c in corners)
    probs = tuple(probabilities) if probabilities is not None else (0.25,) * 4
    return IfsSpec((ratio,) * 4, trans, probs, depth)


def cantor_segment_spec(depth, ratio=1.0 / 3.0):
    """Two contractions fixing (0,0) and (1,0): the middle-thirds Cantor
    measure on the x-axis at the default ratio."""
    return IfsSpec((ratio, ratio), ((0.0, 0.0), (1.0 - ratio, 0.0)), (0.5, 0.5), depth)


# -- transforms ----------------------------------------------------------------

def push_forward(mu, amap):
    """Image measure under an invertible linear map (weights unchanged)."""
    if not isinstance(amap, LinearMap2):
        amap = LinearMap2(amap)
    pts = amap.apply(mu.points)
    prov = dict(mu.provenance)
    prov["pushed_forward"] = amap.to_json_tuple()
    smin = float(np.linalg.svd(amap.matrix, compute_uv=False)[-1])
    spacing = mu._spacing * smin if mu._spacing not in (None, math.inf) else mu._spacing
    return PointMeasure(pts, mu.weights, prov, spacing)


def blow_up(mu, x, r, alpha, window):
    """Rescaled restriction: atoms (p - x)/r for |p - x|_2 <= r * window,
    weights scaled by r^-alpha.

    This realizes a single-scale zoom of the measure at x. It is a finite
    stand-in for a tangent object; no limit is taken and the provenance
    marks convergence as not certified.
    """
    if r <= 0 or window <= 0:
        raise MeasureError("scale and window must be positive")
    x = np.asarray(x, dtype=np.float64)
    reach = r * window
    cand = mu.index.query_box(x - reach, x + reach)
    if cand.size:
        rel = mu.points[cand] - x
        inside = np.hypot(rel[:, 0], rel[:, 1]) <= reach
        rel = rel[inside] / r
        w = mu.weights[cand[inside]] * r ** (-alpha)
    else:
        rel = np.zeros((0, 2))
        w = np.zeros(0)
    prov = {
        "kind": "blow_up",
        "of": mu.provenance.get("kind", "raw"),
        "center": x.tolist(),
        "scale": float(r),
        "alpha": float(alpha),
        "window": float(window),
        "convergence_certified": False,
    }
    spacing = mu._spacing / r if mu._spacing not in (None, math.inf) else mu._spacing
    return PointMeasure(rel, w, prov, spacing)


# -- serialization ---------------------------------------------------------------

def write_pmsr(mu, path):
    """Binary columnar format: magic PMSR1, little-endian u64 count,
    f64 x[], f64 y[], f64 w[], JSON trailer with provenance."""
    trailer = dict(mu.provenance)
    if mu._spacing is not None and math.isfinite(mu._spacing):
        trailer["_spacing"] = mu._spacing
    blob = json.dumps(trailer).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(np.array([mu.size], dtype="<u8").tobytes())
        f.write(mu.points[:, 0].astype("<f8").tobytes())
        f.write(mu.points[:, 1].astype("<f8").tobytes())
        f.write(mu.weights.astype("<f8").tobytes())
        f.write(blob)


def read_pmsr(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:5] != _MAGIC:
        raise MeasureError("not a PMSR1 file")
    n = int(np.frombuffer(data[5:13], dtype="<u8")[0])
    off = 13
    cols = []
    for _ in range(3):
        cols.append(np.frombuffer(data[off : off + 8 * n], dtype="<f8").copy())
        off += 8 * n
    trailer = json.loads(data[off:].decode("utf-8")) if off < len(data) else {}
    spacing = trailer.pop("_spacing", None)
    pts = np.column_stack([cols[0], cols[1]])
    return PointMeasure(pts, cols[2], trailer, spacing)


def write_csv(mu, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write("x,y,w\n")
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([mu.points, mu.weights]), delimiter=",", fmt="%.17g")
        f.write(buf.getvalue())


def from_generator_spec(spec, seed=0):
    """Build a measure from its JSON description (CLI entry point)."""
    kind = spec.get("generator")
    if kind == "lebesgue":
        return gen_lebesgue(spec["rect"], spec["atoms"], spec.get("seed", seed))
    if kind == "lebesgue_grid":
        return gen_lebesgue_grid(spec["rect"], spec["atoms"])
    if kind == "segment":
        norm_spec = spec.get("normalize")
        normalize = None
        if norm_spec not in (None, "raw"):
            from normlab import norms as _norms

            normalize = _norms.from_dict(norm_spec)
        return gen_segment(spec["direction"], spec["half_length"], spec["spacing"], normalize)
    if kind == "four_corner":
        s = four_corner_spec(spec["depth"], spec.get("ratio", 1.0 / 3.0), spec.get("probabilities"))
        return gen_ifs(s)
    if kind == "cantor_segment":
        return gen_ifs(cantor_segment_spec(spec["depth"], spec.get("ratio", 1.0 / 3.0)))
    if kind == "ifs":
        s = IfsSpec(
            tuple(m["scale"] for m in spec["maps"]),
            tuple(tuple(m["translation"]) for m in spec["maps"]),
            tuple(spec["probabilities"]),
            spec["depth"],
        )
        return gen_ifs(s)
    raise MeasureError(f"unknown generator {kind!r}")
