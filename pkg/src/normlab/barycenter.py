"""Polarization averages, nonlinear barycenters and their decay bounds.

All sums here accumulate in compensated form with a fixed order:
cancellation is the signal (symmetric measures should produce barycenters
at roundoff level), so naive summation error would masquerade as a
nonzero result.

For a measure that is alpha-uniform at scale r, the polarization average
in direction y obeys two bounds:

* trivially |b(r; y)| <= r |y| (and in weighted form
  |b(r; y)| <= (mass(B(0,r))/r^alpha) * r * |y| for any measure);
* quadratically |b(r; y)| <= max(2, (1 + 4 alpha)/2) * |y|^2 for support
  points y in B(0, r), with the constant assembled from the shifted-ball
  estimate (the |y| >= r/2 case gives 2|y|^2; otherwise the moon regions
  between B(0,r) and B(y,r) carry at most alpha |y| r^(alpha-1) mass
  each, contributing 4 alpha |y|^2 on top of |y|^2 / 2). The quadratic
  form is only asserted for certified-uniform measures and only for
  alpha >= 1, where 1 - (1-t)^alpha <= alpha t holds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from normlab import _kernels
from normlab.errors import RayMassError, UniformityError
from normlab.measures import ball_atoms, ball_mass
from normlab.norms import grad_norm_sq_batch, polarization_batch
from normlab.density import UniformityReport, uniformity_check

_ORIGIN = np.zeros(2)


def polarization_average(mu, n, r, y, alpha):
    """r^-alpha times the polarization mass sum over the ball B(0, r)."""
    y = np.asarray(y, dtype=np.float64)
    idx = ball_atoms(mu, n, _ORIGIN, r)
    if idx.size == 0:
        return 0.0
    vals = polarization_batch(n, mu.points[idx], y)
    return _kernels.comp_dot(mu.weights[idx], vals) * r ** (-alpha)


def nonlinear_barycenter(mu, n, r, alpha, ray_tol=1e-9, ray_fraction_limit=1e-3):
    """r^-alpha times the integral of grad|.|^2 over the ball B(0, r).

    Atoms on non-differentiability rays take the subdifferential-midpoint
    surrogate; if their mass fraction inside the ball exceeds the limit
    the computation refuses (the quantity is then dominated by the ray
    convention, not the measure).
    """
    idx = ball_atoms(mu, n, _ORIGIN, r)
    if idx.size == 0:
        return np.zeros(2)
    pts = mu.points[idx]
    w = mu.weights[idx]
    on_ray = n.on_ray_mask(pts, ray_tol)
    if np.any(on_ray):
        frac = _kernels.comp_sum(w[on_ray]) / _kernels.comp_sum(w)
        if frac > ray_fraction_limit:
            raise RayMassError(frac, ray_fraction_limit)
    grads, _ = grad_norm_sq_batch(n, pts, ray_policy="midpoint", ray_tol=ray_tol)
    scale = r ** (-alpha)
    return np.array([
        _kernels.comp_dot(w, grads[:, 0]) * scale,
        _kernels.comp_dot(w, grads[:, 1]) * scale,
    ])


@dataclass(frozen=True)
class DecayScan:
    radius: float
    alpha: float
    y_points: np.ndarray
    y_norms: np.ndarray
    abs_averages: np.ndarray
    ratios: np.ndarray
    c_hat: float
    trivial_margin: float
    weighted_trivial_margin: float
    ceiling: float
    ceiling_ok: bool
    uniformity: UniformityReport

    def csv_rows(self):
        return [
            (float(y[0]), float(y[1]), float(ny), float(b), float(q))
            for y, ny, b, q in zip(self.y_points, self.y_norms, self.abs_averages, self.ratios)
        ]

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("y_x,y_y,norm_y,abs_b,ratio\n")
            for row in self.csv_rows():
                f.write(",".join(repr(v) for v in row) + "\n")

    def summary(self):
        return {
            "r": self.radius,
            "alpha": self.alpha,
            "C_hat": self.c_hat,
            "trivial_margin": self.trivial_margin,
            "ceiling": self.ceiling,
            "pass": self.ceiling_ok,
        }

    def to_json(self):
        return json.dumps(self.summary())


def quadratic_ceiling(alpha):
    """max(2, (1 + 4 alpha)/2), valid for alpha >= 1."""
    return max(2.0, (1.0 + 4.0 * alpha) / 2.0)


def decay_scan(
    mu, n, r, alpha, y_set,
    uniformity_radii=None, uniformity_tol=0.05, uniformity_seed=0, centers=12,
):
    """Polarization-average decay ratios |b(r; y)| / |y|^2 over support
    points y.

    Requires the measure to pass the uniformity check at the given
    exponent (the quadratic bound is a statement about uniform measures).
    The fitted constant is the max ratio over |y| <= r/2; the trivial
    bound is verified in both the plain and the mass-weighted form.
    """
    if uniformity_radii is None:
        lo, hi = mu.trusted_window()
        hi = min(hi, r)
        uniformity_radii = np.geomspace(max(lo, hi / 64.0), hi, 5)
        if math.isfinite(mu.spacing) and mu.spacing > 0.0:
            uniformity_radii = np.unique((np.floor(uniformity_radii / mu.spacing) + 0.5) * mu.spacing)
    rep = uniformity_check(
        mu, n, alpha, uniformity_radii, centers=centers, tol=uniformity_tol, seed=uniformity_seed
    )
    if not rep.passed:
        raise UniformityError(
            f"decay scan refused: uniformity deviation {rep.deviation:.3g} > {rep.tol:.3g}"
        )
    ys = np.asarray(y_set, dtype=np.float64).reshape(-1, 2)
    y_norms = n.value_batch(ys)
    # one candidate gather for the whole scan; per y only |z - y| changes
    idx = ball_atoms(mu, n, _ORIGIN, r)
    zpts = mu.points[idx]
    w = mu.weights[idx]
    vz2 = n.value_batch(zpts) ** 2
    scale = r ** (-alpha)
    absb = np.empty(ys.shape[0])
    for i, (y, ny) in enumerate(zip(ys, y_norms)):
        vd = n.value_batch(zpts - y)
        vals = 0.5 * (vz2 + ny * ny - vd * vd)
        absb[i] = abs(_kernels.comp_dot(w, vals) * scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(y_norms > 0.0, absb / y_norms**2, 0.0)
    half = y_norms <= r / 2.0
    c_hat = float(np.max(ratios[half])) if np.any(half) else math.nan
    trivial_margin = float(np.max(absb - r * y_norms))
    mass_scale = ball_mass(mu, n, _ORIGIN, r) / r**alpha
    weighted_margin = float(np.max(absb - mass_scale * r * y_norms * (1.0 + 1e-9)))
    ceiling = quadratic_ceiling(alpha)
    ceiling_ok = bool(np.all(ratios <= ceiling))
    return DecayScan(
        float(r), float(alpha), ys, y_norms, absb, ratios,
        c_hat, trivial_margin, weighted_margin, ceiling, ceiling_ok, rep,
    )


@dataclass(frozen=True)
class PairingCheck:
    rhos: np.ndarray
    w_points: np.ndarray
    barycenters: np.ndarray
    pairings: np.ndarray
    max_abs_pairing: float

    def summary(self):
        return {
            "max_abs_pairing": self.max_abs_pairing,
            "rhos": self.rhos.tolist(),
            "n_w": int(self.w_points.shape[0]),
        }


def barycenter_pairing_check(mu, n, rho_set, w_set, alpha, **barycenter_kwargs):
    """<b(rho), w> over scales rho and support points w.

    Diagnostic only: near-zero values are consistent with vanishing
    barycenter pairings for genuine uniform blow-ups, large values flag
    non-uniformity or resolution limits. Nothing is asserted here.
    """
    rhos = np.asarray(rho_set, dtype=np.float64)
    ws = np.asarray(w_set, dtype=np.float64).reshape(-1, 2)
    bary = np.array([nonlinear_barycenter(mu, n, rho, alpha, **barycenter_kwargs) for rho in rhos])
    pair = bary @ ws.T
    return PairingCheck(rhos, ws, bary, pair, float(np.max(np.abs(pair))) if pair.size else 0.0)
