"""Norm descriptors: values, gradients, subdifferentials, polarization."""

import json
import math

import numpy as np
import pytest

from normlab import norms
from normlab.errors import InvalidDescriptorError, RayError
from normlab.norms import (
    OriginSubdifferential,
    eval_norm,
    grad_norm_sq,
    grad_norm_sq_batch,
    non_differentiability_rays,
    polarization,
    polarization_batch,
    taylor_remainder,
)

from conftest import sample_points

SQRT2 = math.sqrt(2.0)


class TestEvalExamples:
    def test_euclidean_pythagoras(self):
        assert eval_norm(norms.euclidean(), [3, 4]) == 5.0

    def test_linf_max(self):
        assert eval_norm(norms.lp("inf"), [1, -1]) == 1.0

    def test_square_gauge(self):
        assert eval_norm(norms.square_norm(), [0.5, 0.25]) == 0.5

    def test_p_below_one_rejected(self):
        with pytest.raises(InvalidDescriptorError):
            norms.lp(0.7)


class TestSubdifferential:
    def test_l1_axis_segment(self):
        sub = norms.lp(1).subdifferential([1, 0])
        assert not sub.degenerate
        np.testing.assert_array_equal(sub.v_minus, [1, -1])
        np.testing.assert_array_equal(sub.v_plus, [1, 1])

    def test_euclidean_singleton(self):
        sub = norms.euclidean().subdifferential([0, 2])
        assert sub.degenerate
        np.testing.assert_allclose(sub.v_minus, [0, 1])

    def test_square_edge_singleton(self):
        sub = norms.square_norm().subdifferential([1, 0])
        assert sub.degenerate
        np.testing.assert_array_equal(sub.v_minus, [1, 0])

    def test_origin_is_special(self):
        assert isinstance(norms.lp(1).subdifferential([0, 0]), OriginSubdifferential)

    def test_subgradient_inequality(self, fleet, rng):
        # every endpoint and midpoint supports the norm from below
        ys = sample_points(rng, 400)
        for n in fleet.values():
            vals = n.value_batch(ys)
            for x in sample_points(rng, 12):
                sub = n.subdifferential(x)
                base = n.value(x)
                for u in (sub.v_minus, sub.v_plus, sub.midpoint()):
                    slack = vals - (base + (ys - x) @ u)
                    assert slack.min() >= -1e-9 * (1.0 + np.abs(vals).max())

    def test_subdifferential_monotone(self, fleet, rng):
        for n in fleet.values():
            xs = sample_points(rng, 40)
            ys = sample_points(rng, 40)
            for x, y in zip(xs, ys):
                v = n.subdifferential(x).midpoint()
                w = n.subdifferential(y).midpoint()
                assert (v - w) @ (x - y) >= -1e-9

    def test_brute_force_active_set_polygon(self, rng):
        # endpoints returned at a vertex direction are exactly the two
        # adjacent edge functionals found by exhaustive activity scan
        for seed in range(6):
            n = norms.random_polygon(seed)
            for k in range(n.vertices.shape[0]):
                x = 1.7 * n.vertices[k]
                sub = n.subdifferential(x)
                dots = n.functionals @ x
                active = set(np.flatnonzero(dots >= dots.max() * (1 - 1e-12)))
                assert len(active) == 2
                got = {tuple(sub.v_minus), tuple(sub.v_plus)}
                expect = {tuple(n.functionals[i]) for i in active}
                assert got == expect


class TestGradNormSq:
    def test_examples(self):
        np.testing.assert_allclose(grad_norm_sq(norms.euclidean(), [1, 2]), [2, 4])
        np.testing.assert_allclose(grad_norm_sq(norms.lp(1), [1, 2]), [6, 6])
        np.testing.assert_allclose(grad_norm_sq(norms.lp("inf"), [2, 1]), [4, 0])

    def test_zero_at_origin(self, fleet):
        for n in fleet.values():
            np.testing.assert_array_equal(grad_norm_sq(n, [0, 0]), [0, 0])

    def test_error_policy_on_ray(self):
        with pytest.raises(RayError):
            norms.lp(1).gradient([1.0, 0.0], ray_policy="error")

    def test_midpoint_policy_counts(self):
        norms.reset_ray_surrogate_count()
        g, k = grad_norm_sq_batch(norms.lp(1), np.array([[1.0, 0.0], [1.0, 1.0]]))
        assert k == 1
        assert norms.ray_surrogate_count() == 1
        np.testing.assert_allclose(g[0], [2, 0])  # midpoint of the axis segment

    def test_midpoint_used_inside_ray_band(self):
        # a point near but not exactly on the kink still gets the segment
        # midpoint under a loose angular band
        g, k = norms.lp(1).gradient_batch(np.array([[1.0, 1e-12]]), ray_tol=1e-9)
        assert k == 1
        np.testing.assert_array_equal(g[0], [1.0, 0.0])
        g, k = norms.lp("inf").gradient_batch(np.array([[1.0, 1.0 - 1e-12]]), ray_tol=1e-9)
        assert k == 1
        np.testing.assert_array_equal(g[0], [0.5, 0.5])

    def test_odd_and_1_homogeneous(self, fleet, rng):
        for n in fleet.values():
            pts = sample_points(rng, 200)
            pts = pts[~n.on_ray_mask(pts, 1e-7)]
            g, _ = grad_norm_sq_batch(n, pts)
            gneg, _ = grad_norm_sq_batch(n, -pts)
            np.testing.assert_allclose(gneg, -g, atol=1e-12)
            lam = rng.uniform(0.1, 10.0, size=(pts.shape[0], 1))
            gs, _ = grad_norm_sq_batch(n, lam * pts)
            np.testing.assert_allclose(gs, lam * g, rtol=1e-9, atol=1e-12)

    def test_finite_difference(self, fleet, rng):
        for name, n in fleet.items():
            pts = sample_points(rng, 60)
            pts = pts[~n.on_ray_mask(pts, 1e-4)][:30]
            for x in pts:
                h = 1e-5 * (1.0 + n.value(x))
                num = np.array([
                    (n.value(x + [h, 0]) ** 2 - n.value(x - [h, 0]) ** 2) / (2 * h),
                    (n.value(x + [0, h]) ** 2 - n.value(x - [0, h]) ** 2) / (2 * h),
                ])
                g = grad_norm_sq(n, x)
                np.testing.assert_allclose(g, num, rtol=1e-6, atol=1e-6 * (1 + n.value(x)), err_msg=name)


class TestPolarization:
    def test_euclidean_is_inner_product(self, rng):
        e = norms.euclidean()
        for z, y in zip(sample_points(rng, 30), sample_points(rng, 30)):
            np.testing.assert_allclose(polarization(e, z, y), z @ y, rtol=1e-12, atol=1e-12)

    def test_diagonal_is_norm_squared(self, fleet, rng):
        for n in fleet.values():
            z = rng.uniform(-2, 2, size=2)
            assert polarization(n, z, z) == pytest.approx(n.value(z) ** 2, rel=1e-12)

    def test_linf_example(self):
        assert polarization(norms.lp("inf"), [1, 0], [0, 1]) == 0.5

    def test_cauchy_schwarz_and_2_homogeneity(self, fleet, rng):
        for n in fleet.values():
            zs = sample_points(rng, 300)
            ys = sample_points(rng, 300)
            for z, y in zip(zs[:40], ys[:40]):
                v = polarization(n, z, y)
                assert abs(v) <= n.value(z) * n.value(y) * (1 + 1e-12) + 1e-12
                lam = rng.uniform(0, 3)
                assert polarization(n, lam * z, lam * y) == pytest.approx(lam**2 * v, rel=1e-9, abs=1e-12)

    def test_batch_matches_scalar(self, fleet, rng):
        zs = sample_points(rng, 50)
        y = np.array([0.3, -0.7])
        for n in fleet.values():
            batch = polarization_batch(n, zs, y)
            for z, b in zip(zs, batch):
                assert b == pytest.approx(polarization(n, z, y), rel=1e-12, abs=1e-12)


class TestTaylorRemainder:
    def test_euclidean_equals_y_squared(self):
        assert taylor_remainder(norms.euclidean(), [1, 0], [0, 1]) == pytest.approx(1.0, rel=1e-12)

    def test_zero_direction(self, fleet):
        for n in fleet.values():
            assert taylor_remainder(n, [0.7, 0.3], [0, 0]) == 0.0

    def test_vanishes_to_first_order(self, fleet):
        # |remainder(z, t y)| / t -> 0 along shrinking t
        for n in fleet.values():
            z = np.array([0.73, 0.22])
            if n.on_ray_mask(z.reshape(1, 2), 1e-6)[0]:
                z = np.array([0.81, 0.13])
            y = np.array([0.4, 0.31])
            slopes = [abs(taylor_remainder(n, z, t * y)) / t for t in (1e-2, 1e-3, 1e-4)]
            assert slopes[0] > slopes[1] > slopes[2] - 1e-18

    def test_linf_shrinking_along_axis(self):
        n = norms.lp("inf")
        # remainder is exactly t^2 on the edge interior, so the slope is t
        vals = [taylor_remainder(n, [1, 0], [t, 0]) / t for t in (1e-2, 1e-3, 1e-4)]
        assert all(abs(a) <= t * (1 + 1e-6) + 1e-15 for a, t in zip(vals, (1e-2, 1e-3, 1e-4)))


class TestNormAxioms:
    def test_homogeneity_symmetry_triangle(self, fleet, rng):
        for name, n in fleet.items():
            pts = sample_points(rng, 10_000)
            lam = rng.uniform(0, 10, size=10_000)
            v = n.value_batch(pts)
            lv = n.value_batch(lam[:, None] * pts)
            assert np.all(np.abs(lv - lam * v) <= 1e-12 * (1.0 + lam * v)), name
            nv = n.value_batch(-pts)
            assert np.all(np.abs(nv - v) <= 1e-12 * (1.0 + v)), name
            a, b = pts[:5000], pts[5000:]
            s = n.value_batch(a + b)
            assert np.all(s <= n.value_batch(a) + n.value_batch(b) + 1e-12 * (1 + s)), name

    def test_zero_only_at_origin(self, fleet):
        for n in fleet.values():
            assert n.value([0, 0]) == 0.0
            assert n.value([1e-12, 0]) > 0.0


class TestRays:
    def test_euclidean_empty(self):
        assert non_differentiability_rays(norms.euclidean()).size == 0

    def test_l1_axes(self):
        np.testing.assert_allclose(
            non_differentiability_rays(norms.lp(1)), [0, math.pi / 2, math.pi, 3 * math.pi / 2]
        )

    def test_square_diagonals(self):
        np.testing.assert_allclose(
            non_differentiability_rays(norms.square_norm()),
            [math.pi / 4, 3 * math.pi / 4, 5 * math.pi / 4, 7 * math.pi / 4],
        )

    def test_linear_image_maps_rays(self):
        from normlab.geometry import LinearMap2

        amap = LinearMap2([[2.0, 0.0], [0.0, 1.0]])
        n = norms.linear_image(amap, norms.lp(1))
        rays = non_differentiability_rays(n)
        assert rays.size == 4
        # axis rays stay axes under a diagonal map
        np.testing.assert_allclose(np.sort(rays), [0, math.pi / 2, math.pi, 3 * math.pi / 2], atol=1e-12)


class TestSerialization:
    def test_roundtrip(self, fleet):
        for n in fleet.values():
            back = norms.from_json(n.to_json())
            xs = np.array([[0.3, 1.7], [-2.0, 0.4], [0.9, -0.1]])
            np.testing.assert_allclose(back.value_batch(xs), n.value_batch(xs), rtol=1e-12)

    def test_p_inf_distinguished(self):
        d = json.loads(norms.lp("inf").to_json())
        assert d["p"] == "inf"
        assert norms.from_dict(d).p == math.inf

    def test_antipodal_closure_on_load(self):
        # upper-half vertices only; closure must supply the antipodes
        n = norms.from_dict({"kind": "polygon", "vertices": [[2, 1], [0, 1]]})
        assert n.vertices.shape[0] == 4
        assert n.value([1, 0]) == pytest.approx(1.0)

    def test_invalid_polygon_rejected(self):
        # not antipodally paired
        with pytest.raises(InvalidDescriptorError):
            norms.PolygonNorm([[1, 0], [0, 1], [-1, 0], [0, -2]])
        # collinear vertices break strict convexity
        with pytest.raises(InvalidDescriptorError):
            norms.PolygonNorm([[1, -1], [1, 0], [1, 1], [-1, 1], [-1, 0], [-1, -1]])
        # odd count
        with pytest.raises(InvalidDescriptorError):
            norms.PolygonNorm([[1, 0], [0, 1], [-1, 0]])
