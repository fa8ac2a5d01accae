"""Cones, monotonicity machinery, squeeze and shear constructions."""

import math

import numpy as np
import pytest

from normlab import geometry as geo
from normlab import norms
from normlab.errors import DegenerateNormError, InvalidDescriptorError, RayError

SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2


class TestLinearMap2:
    def test_inverse_and_det(self):
        m = geo.LinearMap2([[1, 2], [3, 4]])
        assert m.determinant == pytest.approx(-2.0)
        np.testing.assert_allclose(m.matrix @ m.inverse, np.eye(2), atol=1e-12)

    def test_singular_rejected(self):
        with pytest.raises(InvalidDescriptorError):
            geo.LinearMap2([[1, 2], [2, 4]])

    def test_json_tuple_roundtrip(self):
        m = geo.LinearMap2([[1.5, -0.25], [0.0, 2.0]])
        back = geo.LinearMap2.from_json_tuple(m.to_json_tuple())
        np.testing.assert_array_equal(back.matrix, m.matrix)

    def test_apply_shapes(self):
        m = geo.LinearMap2.rotation(0.5)
        v = m.apply([1.0, 0.0])
        assert v.shape == (2,)
        pts = m.apply(np.ones((5, 2)))
        assert pts.shape == (5, 2)
        np.testing.assert_allclose(m.inverse_apply(pts @ np.eye(2)), m.inverted().apply(pts))


class TestCones:
    def test_bilateral_examples(self):
        c = geo.Cone.bilateral([0, 0], [1, 0], 1.0)
        assert geo.cone_contains(c, [1, 0.5])
        assert not geo.cone_contains(c, [0.5, 1.0001])

    def test_directional_requires_forward(self):
        c = geo.Cone.directional([0, 0], [0, 1], 1.0)
        assert not geo.cone_contains(c, [0.5, -1.0])
        assert geo.cone_contains(c, [0.5, 1.0])

    def test_zero_aperture_is_axis_line(self):
        c = geo.Cone.bilateral([1, 1], [0, 1], 0.0)
        assert geo.cone_contains(c, [1, 3])
        assert not geo.cone_contains(c, [1.001, 3])

    def test_apex_member_and_scaling(self, rng):
        c = geo.Cone.directional([0.3, -0.2], [1, 2], 0.7)
        assert geo.cone_contains(c, c.apex)
        y = np.array([1.1, 1.7])
        m0 = geo.cone_contains(c, y)
        for lam in rng.uniform(0, 5, size=20):
            assert geo.cone_contains(c, c.apex + lam * (y - c.apex)) == m0


class TestBoundaryNormal:
    def test_examples(self):
        np.testing.assert_allclose(geo.boundary_normal(norms.euclidean(), [0, 1]), [0, 1])
        np.testing.assert_allclose(geo.boundary_normal(norms.lp("inf"), [1, 0.3]), [1, 0])
        np.testing.assert_allclose(
            geo.boundary_normal(norms.lp(1), [0.5, 0.5]), [INV_SQRT2, INV_SQRT2]
        )

    def test_outward_and_unit(self, fleet, rng):
        thetas = rng.uniform(0, 2 * math.pi, size=64)
        for n in fleet.values():
            pts = n.boundary_batch(thetas)
            pts = pts[~n.on_ray_mask(pts, 1e-6)]
            for x in pts:
                nv = geo.boundary_normal(n, x)
                assert math.hypot(nv[0], nv[1]) == pytest.approx(1.0, rel=1e-12)
                assert nv @ x > 0.0

    def test_ray_error(self):
        with pytest.raises(RayError):
            geo.boundary_normal(norms.lp(1), [1, 0])


class TestClassify:
    def test_euclidean_always_strict(self, rng):
        e = norms.euclidean()
        for _ in range(8):
            d = rng.normal(size=2)
            assert geo.classify_monotonicity(e, d).classification == "strict"

    def test_linf_vertical_weak(self):
        rep = geo.classify_monotonicity(norms.lp("inf"), [0, 1])
        assert rep.classification == "weak"
        assert abs(rep.min_dot) <= 1e-9
        # witness on a vertical edge
        assert abs(abs(rep.witness[0]) - 1.0) < 1e-9

    def test_linf_diagonal_strict(self):
        rep = geo.classify_monotonicity(norms.lp("inf"), [1, -1])
        assert rep.classification == "strict"
        assert rep.min_dot == pytest.approx(INV_SQRT2, abs=1e-6)

    def test_l1_vertical_strict(self):
        rep = geo.classify_monotonicity(norms.lp(1), [0, 1])
        assert rep.classification == "strict"
        assert rep.min_dot == pytest.approx(INV_SQRT2, abs=1e-6)

    def test_minimum_samples_enforced(self):
        with pytest.raises(ValueError):
            geo.classify_monotonicity(norms.euclidean(), [0, 1], samples=16)

    def test_csv_row(self):
        rep = geo.classify_monotonicity(norms.euclidean(), [0, 1])
        row = rep.csv_row()
        assert row[2] == "strict" and len(row) == 6


class TestQuantitative:
    def test_euclidean_sigma_one(self):
        q = geo.quantitative_monotonicity(norms.euclidean(), np.array([0.0, 1.0]), [1.0])
        assert q.delta == pytest.approx(INV_SQRT2, abs=1e-9)

    def test_euclidean_small_sigma_close_to_one(self):
        q = geo.quantitative_monotonicity(norms.euclidean(), np.array([0.0, 1.0]), [1e-4])
        assert q.delta == pytest.approx(1.0, abs=1e-6)

    def test_linf_top_edge(self):
        q = geo.quantitative_monotonicity(norms.lp("inf"), np.array([0.0, 1.0]), [0.5])
        assert q.delta == pytest.approx(1.0, abs=1e-12)

    def test_antitone_in_sigma(self, fleet):
        grid = [1.0, 0.5, 0.25, 0.125, 0.0625]
        for n in fleet.values():
            theta = 0.37
            nu = n.boundary_point(theta)
            try:
                q = geo.quantitative_monotonicity(n, nu, grid)
            except geo.MonotonicityCertificateError:
                continue
            deltas = q.deltas
            assert np.all(np.diff(deltas) >= -1e-15)  # sigmas descend, deltas ascend

    def test_fresh_samples_respect_delta(self, fleet):
        # re-evaluating on a finer grid never undercuts the certificate
        for n in fleet.values():
            nu = np.array([0.23, 1.0])
            q = geo.quantitative_monotonicity(n, nu, [0.25], samples=1024)
            q2 = geo.quantitative_monotonicity(n, nu, [0.25], samples=4096)
            assert q2.delta >= q.delta - 1e-9


class TestFindTwoStrict:
    def test_fleet_constructive(self):
        for p in (1, 1.5, 4, "inf"):
            res = geo.find_two_strict_directions(norms.lp(p))
            assert not res.degenerate
            assert res.certificates_strict()
            cross = res.nu1[0] * res.nu2[1] - res.nu1[1] * res.nu2[0]
            assert abs(cross) > 1e-3

    def test_round_balls_degenerate(self):
        for n in (norms.euclidean(), norms.lp(2)):
            res = geo.find_two_strict_directions(n)
            assert res.degenerate
            assert res.certificates_strict()

    def test_random_polygons(self):
        for seed in range(8):
            res = geo.find_two_strict_directions(norms.random_polygon(seed))
            assert not res.degenerate
            assert res.certificates_strict()
            assert min(res.reports["quant_nu1"].delta, res.reports["quant_nu2"].delta) > 0.05

    def test_recertify_with_doubled_samples(self):
        # certificates must survive a rerun at twice the sampling density
        for n in (norms.lp("inf"), norms.lp(1.5), norms.random_polygon(2), norms.random_polygon(6)):
            res = geo.find_two_strict_directions(n, samples=4096)
            body = res.norm_after
            for nu in (res.nu1, res.nu2):
                rep = geo.classify_monotonicity(body, nu, samples=8192)
                assert rep.classification == "strict"

    def test_square_squeeze_geometry(self):
        # farthest point of the square is a corner; after the squeeze the
        # second direction comes from the other diagonal
        res = geo.find_two_strict_directions(norms.lp("inf"))
        assert res.epsilon == 0.5
        xbar, rad, is_round = geo.farthest_boundary_point(norms.lp("inf"))
        assert rad == pytest.approx(SQRT2)
        assert not is_round


class TestFarthestPoint:
    def test_lp_closed_forms(self):
        p, r, round_ = geo.farthest_boundary_point(norms.lp(4))
        assert r == pytest.approx(2 ** (0.5 - 0.25))
        np.testing.assert_allclose(p, [2 ** (-0.25), 2 ** (-0.25)])
        p, r, round_ = geo.farthest_boundary_point(norms.lp(1.2))
        assert r == pytest.approx(1.0)

    def test_grid_scan_matches_vertex_scan(self):
        # force the generic path through a linear image of a smooth norm
        amap = geo.LinearMap2([[2.0, 0.0], [0.0, 1.0]])
        n = norms.linear_image(amap, norms.lp(2))
        p, r, round_ = geo.farthest_boundary_point(n)
        assert not round_
        assert r == pytest.approx(2.0, rel=1e-9)

    def test_rotated_circle_is_round(self):
        amap = geo.LinearMap2.rotation(0.7)
        n = norms.linear_image(amap, norms.lp(2))
        _, r, round_ = geo.farthest_boundary_point(n)
        assert round_ and r == pytest.approx(1.0)


class TestShear:
    def test_sheared_square_exact(self):
        K = norms.polygon([[2, 1], [0, 1], [-2, -1], [0, -1]])
        res = geo.shear_for_weak_monotonicity(K, [1, 0])
        np.testing.assert_allclose(res.map.matrix, [[1, -1], [0, -1]], atol=1e-12)
        img = res.map.apply(K.vertices)
        expect = {(1, -1), (-1, -1), (-1, 1), (1, 1)}
        got = {tuple(np.round(v, 12)) for v in img}
        assert got == expect

    def test_linf_axis(self):
        res = geo.shear_for_weak_monotonicity(norms.lp("inf"), [1, 0])
        np.testing.assert_allclose(res.map.matrix, [[1, 0], [0, -1]], atol=1e-12)
        assert res.report.classification in ("weak", "strict")

    def test_euclidean_identity_up_to_sign(self):
        res = geo.shear_for_weak_monotonicity(norms.euclidean(), [1, 0])
        np.testing.assert_allclose(np.abs(res.map.matrix), np.eye(2), atol=1e-9)

    def test_random_polygons_random_lines(self, rng):
        for seed in range(6):
            n = norms.random_polygon(30 + seed)
            for _ in range(4):
                ang = rng.uniform(0, math.pi)
                d = np.array([math.cos(ang), math.sin(ang)])
                res = geo.shear_for_weak_monotonicity(n, d)
                assert res.report.min_dot >= -1e-9
                q = np.linspace(-3, 3, 7)[:, None] * d
                err = np.max(np.abs(res.map.apply(q) @ geo.perp(d)))
                assert err <= 1e-12


def test_degenerate_norm_error():
    with pytest.raises(DegenerateNormError):
        geo.classify_monotonicity(norms.euclidean(), [0, 1], eta=2.0)
