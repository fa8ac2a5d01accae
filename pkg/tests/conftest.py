import math

import numpy as np
import pytest

from normlab import norms


@pytest.fixture(scope="session")
def fleet():
    """Descriptor fleet covering every variant, including kinked and
    mapped ones."""
    from normlab.geometry import LinearMap2

    return {
        "euclidean": norms.euclidean(),
        "lp1": norms.lp(1),
        "lp1.5": norms.lp(1.5),
        "lp2": norms.lp(2),
        "lp4": norms.lp(4),
        "lpinf": norms.lp("inf"),
        "square": norms.square_norm(),
        "hexagon": norms.polygon(
            [[math.cos(k * math.pi / 3.0), math.sin(k * math.pi / 3.0)] for k in range(6)]
        ),
        "random_poly": norms.random_polygon(5),
        "sheared_square": norms.polygon([[2, 1], [0, 1], [-2, -1], [0, -1]]),
        "mapped_lp1": norms.linear_image(LinearMap2([[1.0, 0.3], [-0.2, 1.1]]), norms.lp(1)),
        "mapped_poly": norms.linear_image(LinearMap2([[0.9, 0.4], [0.0, 1.2]]), norms.random_polygon(9)),
    }


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240813)


def sample_points(rng, n, scale=3.0, avoid_origin=True):
    pts = rng.uniform(-scale, scale, size=(n, 2))
    if avoid_origin:
        small = np.hypot(pts[:, 0], pts[:, 1]) < 1e-6
        pts[small] += 1.0
    return pts
