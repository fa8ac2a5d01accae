"""Touching parallelograms: radii, contact classes, graph scan."""

import math

import numpy as np
import pytest

from normlab import measures as ms
from normlab import touching as tc
from normlab.errors import DichotomyViolation, TouchingError

SQRT2 = math.sqrt(2.0)


def diamond():
    return tc.ParallelogramSpec.unit_sides(
        np.array([1.0, 1.0]) / SQRT2, np.array([1.0, -1.0]) / SQRT2
    )


def axis_square():
    return tc.ParallelogramSpec.unit_sides([1, 0], [0, 1])


def line_measure(h=0.001, half=4.0):
    t = np.arange(-int(half / h), int(half / h) + 1) * h
    return ms.PointMeasure(np.column_stack([t, np.zeros(t.size)]), np.full(t.size, h), spacing=h)


def wedge_measure(h=0.001, half=4.0):
    t = np.arange(-int(half / h), int(half / h) + 1) * h
    return ms.PointMeasure(np.column_stack([t, -np.abs(t)]), np.full(t.size, h), spacing=h)


class TestSpec:
    def test_unit_sides_half_widths(self):
        P = axis_square()
        assert P.h_v == 0.5 and P.h_w == 0.5
        Pd = diamond()
        assert Pd.h_v == pytest.approx(0.5)

    def test_side_lengths_are_one(self):
        for v, w in ([(1, 0), (0, 1)], [(1, 0.2), (-0.3, 1)], [(2, 1), (1, 3)]):
            P = tc.ParallelogramSpec.unit_sides(v, w)
            verts = P.vertices()
            sides = [np.hypot(*(verts[i] - verts[(i + 1) % 4])) for i in range(4)]
            np.testing.assert_allclose(sides, 1.0, rtol=1e-12)

    def test_degenerate_normals_rejected(self):
        with pytest.raises(TouchingError):
            tc.ParallelogramSpec.unit_sides([1, 0], [1, 1e-8])

    def test_normalizing_map_sends_body_to_diamond(self, rng):
        P = tc.ParallelogramSpec.unit_sides([1, 0.2], [-0.3, 1])
        N = P.normalizing_map()
        pts = rng.normal(size=(200, 2))
        g1 = P.gauge_batch(pts)
        mapped = pts @ N.T
        g2 = np.abs(mapped).sum(axis=1)
        np.testing.assert_allclose(g1, g2, rtol=1e-12)


class TestTouchingRadius:
    def test_gauge_examples(self):
        assert tc.touching_radius(axis_square(), [0, 1], np.array([[0.0, 0.0]])) == 2.0
        assert tc.touching_radius(axis_square(), [0, 1], line_measure()) == 2.0
        d = tc.touching_radius(diamond(), [0, 0], np.array([[1.0, 1.0]]))
        assert d == pytest.approx(2 * SQRT2)

    def test_center_on_set_rejected(self):
        with pytest.raises(TouchingError):
            tc.touching_radius(axis_square(), [0.0, 0.0], np.array([[0.0, 0.0]]))

    def test_matches_bruteforce_min(self, rng):
        for _ in range(20):
            pts = rng.normal(size=(500, 2))
            P = tc.ParallelogramSpec.unit_sides(rng.normal(size=2), rng.normal(size=2))
            x = rng.normal(size=2) * 3
            d = tc.touching_radius(P, x, pts)
            assert d == float(np.min(P.gauge_batch(pts - x)))

    def test_scaling_linearity(self, rng):
        pts = rng.normal(size=(100, 2)) + 5.0
        P = axis_square()
        x = np.zeros(2)
        d1 = tc.touching_radius(P, x, pts)
        for s in (0.5, 2.0, 4.0):
            assert tc.touching_radius(P, x, s * pts) == pytest.approx(s * d1, rel=1e-12)


class TestClassify:
    def test_square_over_line_edge(self):
        # half-spacing offset keeps the square's corners off the atoms
        rep = tc.classify_touches(axis_square(), [0.0005, 1.0], line_measure())
        assert rep.edge_count == len(rep.labels)
        assert set(rep.labels) == {"edge-w"}

    def test_diamond_over_line_vertex(self):
        rep = tc.classify_touches(diamond(), [0.0, 1.0], line_measure())
        assert rep.vertex_only()
        np.testing.assert_allclose(rep.touch_points[0], [0, 0], atol=1e-12)

    def test_diamond_over_wedge_vertex(self):
        rep = tc.classify_touches(diamond(), [0.0, 1.0], wedge_measure())
        assert rep.vertex_only()
        np.testing.assert_allclose(rep.touch_points[0], [0, 0], atol=1e-12)

    def test_partition_property(self, rng):
        for _ in range(15):
            pts = rng.normal(size=(300, 2))
            P = tc.ParallelogramSpec.unit_sides(rng.normal(size=2), rng.normal(size=2))
            x = rng.normal(size=2) * 2.5
            rep = tc.classify_touches(P, x, pts)
            assert len(rep.labels) == rep.touch_indices.size
            assert rep.vertex_count + rep.edge_count == len(rep.labels)

    def test_primary_and_contact_labels_with_loose_band(self):
        # a tilted parallelogram over a dense line: the single true contact
        # is the bottom corner, but a loose tolerance band sweeps in side
        # atoms; the band must not change the contact verdict
        P = tc.ParallelogramSpec.unit_sides([1, 0], [0.28, -0.96])
        E = line_measure()
        rep = tc.classify_touches(P, [0.1, 0.9], E, tau=0.02)
        assert rep.primary_label == "vertex"
        assert rep.contact_vertex_only()
        assert rep.edge_count > 0  # band members along the sides
        assert not rep.vertex_only()
        # the scan accepts this seed and tracks the line's image
        scan = tc.lipschitz_graph_scan(P, E, rep, -0.2, 0.2, 0.01)
        assert scan.lipschitz <= 1.0 + 1e-6
        assert scan.containment_violations == 0
        assert np.max(np.abs(scan.samples_original[:, 1])) <= 1e-9

    def test_frame_covariance(self, rng):
        pts = rng.normal(size=(200, 2))
        P = tc.ParallelogramSpec.unit_sides([1, 0.1], [0.2, 1])
        x = np.array([2.5, 0.5])
        rep = tc.classify_touches(P, x, pts)
        ang = 0.7
        c, s = math.cos(ang), math.sin(ang)
        R = np.array([[c, -s], [s, c]])
        shift = np.array([0.3, -1.2])
        P2 = tc.ParallelogramSpec.unit_sides(R @ P.v, R @ P.w)
        rep2 = tc.classify_touches(P2, R @ x + shift, pts @ R.T + shift)
        assert rep2.radius == pytest.approx(rep.radius, rel=1e-12)
        assert rep2.labels == rep.labels


class TestGraphScan:
    def test_wedge_recovery(self):
        E = wedge_measure()
        seed = tc.classify_touches(diamond(), [0, 1], E)
        scan = tc.lipschitz_graph_scan(diamond(), E, seed, 0.0, 1.0, 0.01)
        assert scan.lipschitz <= 1.0 + 1e-6
        err = np.max(np.abs(scan.samples[:, 1] + np.abs(scan.samples[:, 0])))
        assert err <= 2 * 0.01
        assert scan.containment_violations == 0

    def test_line_flat(self):
        E = line_measure()
        seed = tc.classify_touches(diamond(), [0, 1], E)
        scan = tc.lipschitz_graph_scan(diamond(), E, seed, -0.5, 0.5, 0.01)
        assert scan.lipschitz <= 1e-9
        assert np.max(np.abs(scan.samples[:, 1])) <= 1e-9

    def test_halving_step_consistent(self):
        E = wedge_measure()
        seed = tc.classify_touches(diamond(), [0, 1], E)
        lips = [
            tc.lipschitz_graph_scan(diamond(), E, seed, 0.0, 1.0, step).lipschitz
            for step in (0.02, 0.01, 0.005)
        ]
        for a, b in zip(lips, lips[1:]):
            assert b <= a + 1e-6

    def test_curved_graph_aborts(self):
        # a circular arc curves away from the 45-degree contact cone, so
        # sliding far enough forces contact off the tracked vertex
        h = 0.001
        t = np.arange(-1900, 1901) * h
        E = ms.PointMeasure(np.column_stack([t, 2.0 - np.sqrt(4.0 - t**2)]), np.full(t.size, h), spacing=h)
        seed = tc.classify_touches(diamond(), [0.0, 1.0], E)
        assert seed.vertex_only()
        with pytest.raises(DichotomyViolation) as ei:
            tc.lipschitz_graph_scan(diamond(), E, seed, 0.0, 1.8, 0.05)
        assert 0.0 <= ei.value.t <= 1.8

    def test_rejects_edge_seed(self):
        E = line_measure()
        seed = tc.classify_touches(axis_square(), [0.0005, 1.0], E)
        with pytest.raises(TouchingError):
            tc.lipschitz_graph_scan(axis_square(), E, seed, 0, 1, 0.01)

    def test_frame_recorded(self):
        E = line_measure()
        seed = tc.classify_touches(diamond(), [0, 1], E)
        scan = tc.lipschitz_graph_scan(diamond(), E, seed, -0.2, 0.2, 0.01)
        hdr = scan.json_header()
        assert "frame_matrix" in hdr and "normalized_square_side" in hdr
        rows = scan.csv_rows()
        assert len(rows) == scan.ts.size and len(rows[0]) == 4
        # original-frame samples land back on the line y = 0
        assert np.max(np.abs(scan.samples_original[:, 1])) <= 1e-9
