"""Tests for sphere nets."""

import numpy as np
import pytest

from app.core.exceptions import BudgetExceededError, DomainError
from app.core.gauss import RngStream
from app.engine.nets import (
    check_net_budget,
    greedy_packing,
    min_pairwise_distance,
    random_sphere_points,
    sphere_net,
)


class TestGreedyPacking:
    """Tests for the greedy maximal packing."""

    @pytest.mark.parametrize("k,delta", [(2, 0.2), (3, 0.3)])
    def test_separated(self, k, delta):
        """Accepted points are pairwise at least delta apart."""
        net = greedy_packing(k, delta, RngStream(3, 1), max_rejections=2000)
        assert net.size > 1
        assert min_pairwise_distance(net.points) >= delta

    def test_unit_rows(self):
        """Net points lie on the sphere."""
        net = greedy_packing(3, 0.4, RngStream(3, 2), max_rejections=500)
        np.testing.assert_allclose(np.linalg.norm(net.points, axis=1), 1.0, rtol=1e-12)

    def test_covers_sphere(self):
        """Fresh random points are close to the net."""
        delta = 0.2
        net = greedy_packing(2, delta, RngStream(3, 4))
        queries = random_sphere_points(RngStream(99, 0), 500, 2)
        distances = np.linalg.norm(queries[:, None, :] - net.points[None, :, :], axis=2).min(axis=1)
        assert float(distances.max()) <= 1.5 * delta

    def test_circle_size(self):
        """On S^1 a delta-packing has about 2 pi / (2 arcsin(delta/2)) points."""
        net = greedy_packing(2, 0.1, RngStream(5, 5))
        assert 31 <= net.size <= 63


class TestSphereNet:
    """Tests for the cached, seed-keyed net."""

    def test_same_seed_same_net(self):
        """The net is a function of (k, delta, seed)."""
        a = sphere_net(2, 0.25, seed=17)
        b = sphere_net(2, 0.25, seed=17)
        np.testing.assert_array_equal(a.points, b.points)

    def test_dimension(self):
        """Rows have k coordinates."""
        assert sphere_net(3, 0.5, seed=1).dimension == 3


class TestBudget:
    """Tests for the enumeration budget."""

    def test_dimension_cap(self):
        """k above the supported maximum is refused with a pointer to the optimizer."""
        with pytest.raises(BudgetExceededError, match="optimizer"):
            check_net_budget(5, 0.5)

    def test_size_cap(self):
        """(3/delta)^k above the budget is refused."""
        with pytest.raises(BudgetExceededError):
            check_net_budget(4, 0.001)

    def test_delta_range(self):
        """delta must lie in (0, 1)."""
        with pytest.raises(DomainError):
            check_net_budget(2, 1.5)

    def test_within_budget(self):
        """Small nets pass."""
        check_net_budget(2, 0.05)
