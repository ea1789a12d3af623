"""Path constructions shared by several test modules."""
import math

import numpy as np
from conegeo.geometry import cone
from conegeo.paths import Boundary, DiscretePath


def radial_broken_path(alpha, L1, L2, tau, N, theta_in=0.0, theta_out=None):
    """Two radial legs through a cone apex, each traversed at constant speed.

    The first leg runs from radius ``L1`` on ray ``theta_in`` to the apex,
    reached at parameter ``tau``; the second leaves along ``theta_out`` and
    ends at radius ``L2``. By default the rays are exactly ``pi`` apart in the
    development, the smallest separation that keeps the broken path locally
    shortest.
    """
    if theta_out is None:
        theta_out = theta_in + math.pi / alpha
    s = np.linspace(0.0, 1.0, N + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(s <= tau, L1 * (1.0 - s / tau), L2 * (s - tau) / (1.0 - tau))
    th = np.where(s <= tau, theta_in, theta_out)
    nodes = np.stack([r, th], axis=1)
    return DiscretePath(nodes, Boundary.fixed(nodes[0], nodes[-1]))


def random_broken_geodesic(rng, N_choices=(64, 96, 128, 160), distinct=False):
    """Random radial broken path on a cone with excess angle.

    The break and the constant-speed break both sit on grid nodes that are
    a multiple of 4 apart, so every ``a(t)`` with ``t`` in quarters lands on
    the grid too.
    """
    N = int(rng.choice(N_choices))
    alpha = float(rng.uniform(1.05, 2.0))
    sep = float(rng.uniform(math.pi / alpha, 2 * math.pi - math.pi / alpha))
    i = 4 * int(rng.integers(1, N // 4))
    j = 4 * int(rng.integers(1, N // 4))
    while distinct and j == i:
        j = 4 * int(rng.integers(1, N // 4))
    tau, sigma = i / N, j / N
    total = float(rng.uniform(0.5, 3.0))
    L1, L2 = sigma * total, (1 - sigma) * total
    th0 = float(rng.uniform(-math.pi, math.pi))
    return cone(alpha), radial_broken_path(alpha, L1, L2, tau, N, th0, th0 + sep), (L1, L2, tau, sigma)


def jagged_flat_seed(rng, p, q, N, amplitude=0.3):
    s = np.linspace(0.0, 1.0, N + 1)[:, None]
    p, q = np.asarray(p, float), np.asarray(q, float)
    nodes = p + s * (q - p) + amplitude * rng.normal(size=(N + 1, p.size))
    nodes[0], nodes[-1] = p, q
    return DiscretePath(nodes, Boundary.fixed(p, q))
