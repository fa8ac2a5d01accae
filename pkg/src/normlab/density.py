"""Density profiles, exponent fits, uniformity diagnostics and the
structural checks that consume them.

A profile samples r -> mass(B(x, r)) / r^alpha at one centre. Discrete
clouds distort this ratio below the atom spacing and above the support
size, so every report carries the measure's trusted radius window and
the operations refuse radii outside it rather than extrapolate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from normlab import _kernels
from normlab.errors import MeasureError, ResolutionError, UniformityError
from normlab.geometry import perp
from normlab.measures import ball_atoms

_EXTENT_EPS = 1e-12


def _ball_masses(mu, n, x, radii):
    """Masses of nested closed balls, gathering candidates once.

    Bit-identical to per-radius ball_mass calls: the filtered atom subset
    arrives in the same ascending index order, so the compensated sums
    see the same operand sequence.
    """
    x = np.asarray(x, dtype=np.float64)
    r_max = float(np.max(radii))
    reach = r_max * n.circumscribed_radius
    cand = mu.index.query_box(x - reach, x + reach)
    if cand.size == 0:
        return np.zeros(len(radii))
    vals = n.value_batch(mu.points[cand] - x)
    w = mu.weights[cand]
    return np.array([
        _kernels.comp_sum(w[vals <= r]) if np.any(vals <= r) else 0.0 for r in radii
    ])


@dataclass(frozen=True)
class DensityProfile:
    center: np.ndarray
    alpha: float
    radii: np.ndarray
    values: np.ndarray
    window: tuple
    oscillation: float
    off_support: bool

    def csv_rows(self):
        return [(float(r), float(v)) for r, v in zip(self.radii, self.values)]

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("r,value\n")
            for r, v in self.csv_rows():
                f.write(f"{r!r},{v!r}\n")

    def summary(self):
        return {
            "center": self.center.tolist(),
            "alpha": self.alpha,
            "window": list(self.window),
            "oscillation": self.oscillation,
            "off_support": self.off_support,
        }

    def to_json(self):
        return json.dumps(self.summary())


def density_profile(mu, n, x, alpha, radii, enforce_window=True):
    """Pointwise ratios mass(B(x, r)) / r^alpha over increasing radii.

    Radii must stay inside the measure's trusted window unless
    ``enforce_window`` is disabled. A profile that is zero everywhere is
    returned with ``off_support`` set instead of raising.
    """
    x = np.asarray(x, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    if radii.size == 0 or np.any(np.diff(radii) <= 0.0):
        raise ValueError("radii must be strictly increasing and non-empty")
    window = mu.trusted_window()
    if enforce_window and (radii[0] < window[0] or radii[-1] > window[1]):
        raise ResolutionError(
            f"radii [{radii[0]:.3g}, {radii[-1]:.3g}] leave the trusted window "
            f"[{window[0]:.3g}, {window[1]:.3g}]"
        )
    values = _ball_masses(mu, n, x, radii) / radii**alpha
    off = bool(np.all(values == 0.0))
    if off:
        osc = math.nan
    elif np.any(values == 0.0):
        osc = math.inf
    else:
        osc = float(values.max() / values.min())
    return DensityProfile(x, float(alpha), radii, values, window, osc, off)


def estimate_alpha(mu, n, x, radii):
    """Least-squares slope of log mass against log radius.

    Needs at least 8 radii spanning 1.5 decades with positive masses;
    returns (alpha_hat, r_squared).
    """
    radii = np.asarray(radii, dtype=np.float64)
    if radii.size < 8:
        raise ValueError("need at least 8 radii")
    if math.log10(radii.max() / radii.min()) < 1.5:
        raise ValueError("radii must span at least 1.5 decades")
    x = np.asarray(x, dtype=np.float64)
    masses = _ball_masses(mu, n, x, radii)
    if np.any(masses <= 0.0):
        raise MeasureError("zero ball mass encountered; center off support or radii too small")
    lx = np.log(radii)
    ly = np.log(masses)
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


@dataclass(frozen=True)
class UniformityReport:
    alpha: float
    centers: np.ndarray
    radii: np.ndarray
    deviation: float
    tol: float
    passed: bool
    median_ratio: float

    def summary(self):
        return {
            "alpha": self.alpha,
            "deviation": self.deviation,
            "tol": self.tol,
            "passed": self.passed,
            "median_ratio": self.median_ratio,
            "n_centers": int(self.centers.shape[0]),
        }


def _interior_center_mask(mu, n, centers, r_max):
    """Keep centres whose largest queried ball cannot be truncated by the
    support's bounding box (per axis, skipping collapsed axes)."""
    lo, hi = mu.bbox()
    reach = r_max * n.circumscribed_radius
    keep = np.ones(centers.shape[0], dtype=bool)
    for d in range(2):
        if hi[d] - lo[d] > max(mu.spacing, _EXTENT_EPS):
            keep &= (centers[:, d] >= lo[d] + reach) & (centers[:, d] <= hi[d] - reach)
    return keep


def uniformity_check(mu, n, alpha, radii, centers=16, tol=0.05, seed=0):
    """Deviation of mass(B(x, r)) / r^alpha from its median over sampled
    (centre, radius) pairs.

    Centres are atoms sampled with probability proportional to mass, then
    filtered so that no queried ball sticks out of the support's bounding
    box (a truncated ball says nothing about uniformity). The deviation
    statistic is max |ratio - median| / median; the median is robust to
    the residual boundary effects.
    """
    radii = np.asarray(radii, dtype=np.float64)
    rng = np.random.default_rng(seed)
    k = min(int(centers) * 8, mu.size)
    idx = rng.choice(mu.size, size=k, replace=True, p=mu.weights / mu.total_mass)
    cand = mu.points[np.unique(idx)]
    keep = _interior_center_mask(mu, n, cand, float(radii.max()))
    cand = cand[keep]
    if cand.shape[0] == 0:
        raise UniformityError("no interior centers available at the requested radii")
    cen = cand[: int(centers)]
    ratios = np.concatenate([_ball_masses(mu, n, c, radii) / radii**alpha for c in cen])
    med = float(np.median(ratios))
    if med == 0.0:
        raise UniformityError("median ball mass is zero; wrong exponent or radii")
    dev = float(np.max(np.abs(ratios - med)) / med)
    return UniformityReport(float(alpha), cen, radii, dev, float(tol), dev <= tol, med)


@dataclass(frozen=True)
class AnnulusRow:
    index: int
    inner: float
    outer: float
    occupied: bool
    witness: np.ndarray | None


@dataclass(frozen=True)
class AnnuliReport:
    center: np.ndarray
    n_annuli: int
    alpha: float
    rows: list
    occupied_count: int
    min_witness_gap: float
    disjoint_radius: float
    disjoint_ok: bool
    inside_ok: bool
    inequality_lhs: float
    inequality_rhs: float
    inequality_ok: bool

    def summary(self):
        return {
            "occupied": self.occupied_count,
            "n_annuli": self.n_annuli,
            "disjoint_ok": self.disjoint_ok,
            "inside_ok": self.inside_ok,
            "inequality_lhs": self.inequality_lhs,
            "inequality_rhs": self.inequality_rhs,
            "inequality_ok": self.inequality_ok,
        }


def annuli_packing_check(mu, n, x0, n_annuli, alpha, disjoint_band=None):
    """Occupancy of the annuli B(x0, 2i/2N) minus B(x0, (2i-1)/2N) and the
    packing inequality N (2N)^-alpha <= 2^alpha they imply for an
    alpha-uniform measure.

    One witness atom is selected per occupied annulus (closest to the
    annulus midline); the balls B(witness, 1/(2N)) are checked pairwise
    disjoint by direct distance comparison, up to a resolution band
    (witness spacing in consecutive annuli can equal exactly 2 radii, so
    atom spacing enters the verification).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    N = int(n_annuli)
    if N < 2:
        raise ValueError("need at least two annuli")
    d = n.value_batch(mu.points - x0)
    if float(np.min(d)) > max(2.0 * mu.spacing, _EXTENT_EPS):
        raise MeasureError("center is not within atom spacing of the support")
    rows = []
    witnesses = []
    for i in range(1, N + 1):
        lo_r = (2 * i - 1) / (2.0 * N)
        hi_r = (2 * i) / (2.0 * N)
        mask = (d > lo_r) & (d <= hi_r)
        if np.any(mask):
            ids = np.flatnonzero(mask)
            mid = (lo_r + hi_r) / 2.0
            w = ids[int(np.argmin(np.abs(d[ids] - mid)))]
            wit = mu.points[w].copy()
            witnesses.append(wit)
            rows.append(AnnulusRow(i, lo_r, hi_r, True, wit))
        else:
            rows.append(AnnulusRow(i, lo_r, hi_r, False, None))
    rho = 1.0 / (2.0 * N)
    band = disjoint_band if disjoint_band is not None else 2.0 * mu.spacing + 1e-12
    min_gap = math.inf
    if len(witnesses) >= 2:
        wpts = np.array(witnesses)
        for a in range(len(witnesses)):
            gaps = n.value_batch(wpts[a + 1 :] - wpts[a])
            if gaps.size:
                min_gap = min(min_gap, float(np.min(gaps)))
    disjoint_ok = (len(witnesses) < 2) or (min_gap >= 2.0 * rho - band)
    inside_ok = all(float(n.value_batch((w - x0).reshape(1, 2))[0]) + rho <= 2.0 for w in witnesses)
    lhs = N * (2.0 * N) ** (-alpha)
    rhs = 2.0**alpha
    return AnnuliReport(
        x0, N, float(alpha), rows, len(witnesses), min_gap, rho,
        disjoint_ok, inside_ok, lhs, rhs, lhs <= rhs,
    )


@dataclass(frozen=True)
class RadialIntegralResult:
    lhs: float
    rhs: float
    gap: float
    uniformity: UniformityReport


def radial_integral_check(
    mu, n, x, profile_fn, r_max, exponent,
    uniformity_radii=None, uniformity_tol=0.05, centers=12, seed=0,
):
    """Atom sum of g(|z - x|) against m * integral r^(m-1) g(r) dr.

    The identity is only claimed for measures that are m-uniform, so the
    uniformity check runs first and a failure refuses the comparison.
    ``profile_fn`` must be nonnegative and supported in [0, r_max].
    """
    x = np.asarray(x, dtype=np.float64)
    if uniformity_radii is None:
        lo, hi = mu.trusted_window()
        hi = min(hi, r_max)
        if hi <= lo:
            raise ResolutionError("no trusted radii below r_max for the uniformity check")
        uniformity_radii = np.geomspace(lo, hi, 6)
        if math.isfinite(mu.spacing) and mu.spacing > 0.0:
            # keep radii between atom shells: shell-boundary ties distort
            # the ratios by half a shell on gridded generators
            snapped = (np.floor(uniformity_radii / mu.spacing) + 0.5) * mu.spacing
            uniformity_radii = np.unique(snapped)
    rep = uniformity_check(mu, n, exponent, uniformity_radii, centers=centers, tol=uniformity_tol, seed=seed)
    if not rep.passed:
        raise UniformityError(
            f"measure failed the uniformity check (deviation {rep.deviation:.3g} > {rep.tol:.3g})"
        )
    idx = ball_atoms(mu, n, x, r_max)
    dist = n.value_batch(mu.points[idx] - x)
    gvals = np.asarray([profile_fn(float(t)) for t in dist], dtype=np.float64)
    if np.any(gvals < 0.0):
        raise ValueError("profile function must be nonnegative")
    lhs = _kernels.comp_dot(mu.weights[idx], gvals)
    rhs, _ = quad(lambda t: exponent * t ** (exponent - 1.0) * profile_fn(t), 0.0, r_max, limit=200)
    return RadialIntegralResult(float(lhs), float(rhs), abs(lhs - rhs), rep)


@dataclass(frozen=True)
class StrongConeReport:
    contained: bool
    offender: np.ndarray | None
    max_ratio: float
    atoms_checked: int


def strong_cone_check(mu, z0, axis, aperture, r):
    """Whether every atom in the Euclidean ball B(z0, r) lies in the
    bilateral cone about ``axis`` with the given aperture; reports the
    atom with the worst aperture ratio."""
    z0 = np.asarray(z0, dtype=np.float64)
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / math.hypot(axis[0], axis[1])
    cand = mu.index.query_box(z0 - r, z0 + r)
    rel = mu.points[cand] - z0
    inside = np.hypot(rel[:, 0], rel[:, 1]) <= r
    rel = rel[inside]
    if rel.shape[0] == 0:
        return StrongConeReport(True, None, 0.0, 0)
    along = np.abs(rel @ axis)
    across = np.abs(rel @ perp(axis))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(across == 0.0, 0.0, np.where(along == 0.0, math.inf, across / along))
    i = int(np.argmax(ratio))
    return StrongConeReport(bool(np.max(ratio) <= aperture), rel[i] + z0, float(ratio[i]), rel.shape[0])
