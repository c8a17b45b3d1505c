"""Unit tests for min-norm points, stationarity, Lyapunov value, momentum gap and shadowing."""
import itertools
import math
import unittest
from types import SimpleNamespace
from unittest.mock import patch

import numpy as np
from scipy.optimize import linprog

from core.errors import HullUnavailableError, IndexOutOfRangeError, InvalidParameterError
from core.fields import PhiChoice, PhiKind
from core.problems import make_counterexample, make_l1_regression, make_planted_l1_regression, make_relu_net, Zonotope
from core.schedules import StepsizeSchedule
from services.diagnostics import (
    ProbeTracker,
    di_shadow_distance,
    interpolated_process,
    lyapunov_h,
    min_norm_in_hull,
    min_norm_in_zonotope,
    momentum_gap,
    stationarity_measure,
    stationarity_probe,
)


def simplex_grid_min(P: np.ndarray, resolution: int = 200) -> float:
    """Brute force: min ||w @ P|| over barycentric weights on a grid (at most three vertices)."""
    steps = np.arange(resolution + 1) / resolution
    if P.shape[0] == 1:
        return float(np.linalg.norm(P[0]))
    if P.shape[0] == 2:
        W = np.stack([steps, 1 - steps], axis=1)
    else:
        a, b = np.meshgrid(steps, steps, indexing="ij")
        keep = a + b <= 1.0 + 1e-12
        W = np.stack([a[keep], b[keep], np.clip(1 - a[keep] - b[keep], 0.0, None)], axis=1)
    return float(np.min(np.linalg.norm(W @ P, axis=1)))


def face_enumeration_min(P: np.ndarray) -> float:
    """Exact min-norm by trying every affinely independent face and keeping feasible projections."""
    k, n = P.shape
    best = math.inf
    for size in range(1, min(k, n + 1) + 1):
        for face in itertools.combinations(range(k), size):
            Q = P[list(face)]
            D = Q[1:] - Q[0]
            if size > 1 and np.linalg.matrix_rank(D) < size - 1:
                continue
            t = np.linalg.lstsq(D.T, -Q[0], rcond=None)[0] if size > 1 else np.zeros(0)
            weights = np.concatenate([[1.0 - t.sum()], t])
            if np.all(weights >= -1e-12):
                best = min(best, float(np.linalg.norm(weights @ Q)))
    return best


def segment_min(a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    denom = float(d @ d)
    t = 0.0 if denom == 0.0 else min(1.0, max(0.0, -float(a @ d) / denom))
    return float(np.linalg.norm(a + t * d))


def contains_origin(P: np.ndarray) -> bool:
    """LP feasibility of P^T w = 0, sum w = 1, w >= 0."""
    k, n = P.shape
    A_eq = np.vstack([P.T, np.ones((1, k))])
    b_eq = np.concatenate([np.zeros(n), [1.0]])
    res = linprog(np.zeros(k), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * k, method="highs")
    return res.status == 0


class TestMinNormInHull(unittest.TestCase):
    """Test cases for Wolfe's min-norm point."""

    def test_unit_vectors(self):
        """Test {(1,0),(0,1)} gives (0.5, 0.5)."""
        point, norm = min_norm_in_hull(np.array([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_allclose(point, [0.5, 0.5], atol=1e-12)
        self.assertAlmostEqual(norm, math.sqrt(0.5), places=12)

    def test_segment(self):
        """Test {(-1,-1),(3,1)} gives (0.2, -0.4)."""
        point, norm = min_norm_in_hull(np.array([[-1.0, -1.0], [3.0, 1.0]]))
        np.testing.assert_allclose(point, [0.2, -0.4], atol=1e-12)
        self.assertAlmostEqual(norm, math.sqrt(0.2), places=12)

    def test_contains_origin(self):
        """Test the counterexample hull at (-10, 20) certifies zero."""
        point, norm = min_norm_in_hull(np.array([[3.0, 1.0], [1.0, 1.0], [-1.0, -1.0], [-3.0, -1.0]]))
        self.assertEqual(norm, 0.0)
        np.testing.assert_array_equal(point, [0.0, 0.0])

    def test_single_vertex(self):
        """Test a singleton hull returns the vertex."""
        point, norm = min_norm_in_hull(np.array([[3.0, 4.0]]))
        np.testing.assert_array_equal(point, [3.0, 4.0])
        self.assertEqual(norm, 5.0)

    def test_bad_tolerance(self):
        """Test tol <= 0 is rejected."""
        with self.assertRaises(InvalidParameterError):
            min_norm_in_hull(np.eye(2), tol=0.0)

    def test_random_vertex_sets(self):
        """Test agreement with face enumeration and grids on 500 random sets, exact segments on 2-vertex sets."""
        rng = np.random.default_rng(123)
        for _ in range(500):
            n = int(rng.integers(1, 4))
            k = int(rng.integers(1, 6))
            P = rng.uniform(-2.0, 2.0, size=(k, n))
            _, norm = min_norm_in_hull(P)
            if k == 2:
                self.assertAlmostEqual(norm, segment_min(P[0], P[1]), delta=1e-9)
            self.assertLessEqual(abs(norm - face_enumeration_min(P)), 2e-3)
            if k <= 3:
                self.assertLessEqual(norm, simplex_grid_min(P) + 1e-9)
            self.assertEqual(norm == 0.0, contains_origin(P))

    def test_zonotope_least_squares_matches_enumeration(self):
        """Test the box least-squares path agrees with vertex enumeration."""
        rng = np.random.default_rng(9)
        for _ in range(50):
            z = Zonotope(rng.standard_normal(3) * 2, rng.standard_normal((4, 3)) * 0.5)
            exact = min_norm_in_hull(z.vertices())[1]
            self.assertAlmostEqual(min_norm_in_zonotope(z)[1], exact, delta=1e-6)

    def test_zonotope_many_generators(self):
        """Test six to ten generators in R^6 reach Wolfe's value on the enumerated vertices."""
        rng = np.random.default_rng(17)
        for g in range(6, 11):
            for _ in range(3):
                z = Zonotope(rng.standard_normal(6) * 3, rng.standard_normal((g, 6)))
                exact = min_norm_in_hull(z.vertices())[1]
                self.assertAlmostEqual(min_norm_in_zonotope(z)[1], exact, delta=1e-7)

    def test_zonotope_early_stop_logged(self):
        """Test a least-squares solve that hits its iteration cap is reported."""
        z = Zonotope(np.ones(2), np.eye(2) * 0.5)
        stopped = SimpleNamespace(x=np.zeros(2), status=0, message="The maximum number of iterations is exceeded.")
        with patch("services.diagnostics.lsq_linear", return_value=stopped) as solver:
            with self.assertLogs("services.diagnostics", level="WARNING") as logs:
                min_norm_in_zonotope(z)
        self.assertGreaterEqual(solver.call_args.kwargs["max_iter"], 1000)
        self.assertIn("maximum number of iterations", logs.output[0])


class TestStationarity(unittest.TestCase):
    """Test cases for the stationarity measure."""

    def setUp(self):
        """Set up test fixtures."""
        self.problem = make_counterexample()

    def test_stationary_point(self):
        """Test (-10, 20) is D_f-stationary."""
        self.assertEqual(stationarity_measure(self.problem, [-10.0, 20.0]), 0.0)

    def test_origin(self):
        """Test (0, 0) gives sqrt(0.2)."""
        self.assertAlmostEqual(stationarity_measure(self.problem, [0.0, 0.0]), math.sqrt(0.2), places=9)

    def test_smooth_point(self):
        """Test (1, 1) gives sqrt(10)."""
        self.assertAlmostEqual(stationarity_measure(self.problem, [1.0, 1.0]), math.sqrt(10.0), places=12)

    def test_radius_shrinks_measure(self):
        """Test a radius reaching the kink gives the kinked value."""
        self.assertAlmostEqual(stationarity_measure(self.problem, [0.01, 0.0], radius=0.1), math.sqrt(0.2), places=9)

    def test_many_kinks_use_least_squares(self):
        """Test a planted regression at its solution is stationary beyond the enumeration cap."""
        problem = make_planted_l1_regression(20, 5, seed=0)
        value, is_bound = stationarity_probe(problem, problem.planted, radius=1e-9)
        self.assertFalse(is_bound)
        self.assertEqual(value, 0.0)

    def test_network_upper_bound(self):
        """Test networks report the sampled bound with the flag set."""
        problem = make_relu_net([1, 2, 1], [[1.0], [-1.0]], [0.5, 0.5], loss="half-square")
        value, is_bound = stationarity_probe(problem, np.full(problem.dimension, 0.3))
        self.assertTrue(is_bound)
        self.assertGreaterEqual(value, 0.0)


class TestLyapunov(unittest.TestCase):
    """Test cases for h(x, m) = f(x) + phi(m) / tau."""

    def test_value(self):
        """Test 10.8 + 0.25 = 11.05."""
        h = lyapunov_h(make_counterexample(), [0.2, 0.2], [1.0, 0.0], PhiChoice(PhiKind.HALF_SQUARE), 2.0)
        self.assertAlmostEqual(h, 11.05, places=12)

    def test_zero_momentum(self):
        """Test h = f when m = 0 for every potential."""
        problem = make_counterexample()
        for choice in (PhiChoice(PhiKind.HALF_SQUARE), PhiChoice(PhiKind.L1), PhiChoice(PhiKind.L2), PhiChoice(PhiKind.CLIP, C=1.0)):
            self.assertEqual(lyapunov_h(problem, [0.2, 0.2], [0.0, 0.0], choice, 3.0), problem.full_objective([0.2, 0.2]))

    def test_monotone_in_inverse_tau(self):
        """Test h decreases toward f as tau grows."""
        problem = make_counterexample()
        phi = PhiChoice(PhiKind.L1)
        values = [lyapunov_h(problem, [0.2, 0.2], [1.0, -1.0], phi, tau) for tau in (0.5, 1.0, 10.0, 1e6)]
        self.assertTrue(all(a > b for a, b in zip(values, values[1:])))
        self.assertAlmostEqual(values[-1], 10.8, places=5)

    def test_bad_tau(self):
        """Test tau <= 0 is rejected."""
        with self.assertRaises(InvalidParameterError):
            lyapunov_h(make_counterexample(), [0.0, 0.0], [0.0, 0.0], PhiChoice(), 0.0)


class TestMomentumGap(unittest.TestCase):
    """Test cases for the momentum-tracking gap."""

    def setUp(self):
        """Set up test fixtures."""
        self.problem = make_counterexample()

    def test_member(self):
        """Test m inside the hull has gap 0."""
        self.assertEqual(momentum_gap(self.problem, [0.0, 0.0], [1.0, 0.0], 0.0), 0.0)
        self.assertEqual(momentum_gap(self.problem, [1.0, 1.0], [3.0, 1.0], 0.0), 0.0)

    def test_singleton_distance(self):
        """Test m = 0 at (1, 1) is sqrt(10) away."""
        self.assertAlmostEqual(momentum_gap(self.problem, [1.0, 1.0], [0.0, 0.0], 0.0), math.sqrt(10.0), places=12)

    def test_delta_reduces_gap(self):
        """Test the axis samples reach the kink and the distance is reduced by delta."""
        gap = momentum_gap(self.problem, [0.05, 0.0], [1.0, 0.0], 0.1)
        self.assertEqual(gap, 0.0)

    def test_cover_method(self):
        """Test the covering zonotope agrees on a singleton hull."""
        value = momentum_gap(self.problem, [1.0, 1.0], [0.0, 0.0], 0.0, method="cover")
        self.assertAlmostEqual(value, math.sqrt(10.0), places=12)
        with self.assertRaises(InvalidParameterError):
            momentum_gap(self.problem, [1.0, 1.0], [0.0, 0.0], 0.0, method="ball")

    def test_hull_unavailable(self):
        """Test networks raise HullUnavailableError."""
        problem = make_relu_net([1, 1, 1], [[1.0]], [0.0])
        with self.assertRaises(HullUnavailableError):
            momentum_gap(problem, np.zeros(problem.dimension), np.zeros(problem.dimension), 0.1)


class TestInterpolatedProcess(unittest.TestCase):
    """Test cases for the interpolated path."""

    def test_midpoint(self):
        """Test xs = [0, 1], eta = 0.5 gives 0.5 at t = 0.25."""
        path = interpolated_process([[0.0], [1.0]], [0.5])
        np.testing.assert_array_equal(path(0.25), [0.5])

    def test_anchors(self):
        """Test x(lambda(i)) = x_i exactly."""
        rng = np.random.default_rng(0)
        xs = rng.standard_normal((50, 3))
        etas = StepsizeSchedule(eta0=0.1).eta_array(np.arange(49))
        path = interpolated_process(xs, etas)
        for i in range(50):
            np.testing.assert_array_equal(path(path.times[i]), xs[i])

    def test_constant(self):
        """Test a constant trajectory gives a constant path."""
        path = interpolated_process([[2.0, 1.0]] * 5, [0.1, 0.2, 0.3, 0.4])
        for t in np.linspace(0.0, path.end_time, 17):
            np.testing.assert_array_equal(path(t), [2.0, 1.0])

    def test_out_of_range(self):
        """Test t outside [0, end] raises IndexOutOfRangeError."""
        path = interpolated_process([[0.0], [1.0]], [0.5])
        with self.assertRaises(IndexOutOfRangeError):
            path(0.6)
        with self.assertRaises(IndexOutOfRangeError):
            path(-0.1)

    def test_length_mismatch(self):
        """Test len(etas) must equal len(xs) - 1."""
        with self.assertRaises(InvalidParameterError):
            interpolated_process([[0.0], [1.0]], [0.5, 0.5])

    def test_evaluate_many_matches_scalar(self):
        """Test the vectorized sampler agrees with single evaluations."""
        rng = np.random.default_rng(1)
        path = interpolated_process(rng.standard_normal((20, 2)), rng.uniform(0.1, 0.3, 19))
        ts = np.linspace(0.0, path.end_time * 0.999, 40)
        expected = np.array([path(t) for t in ts])
        np.testing.assert_allclose(path.evaluate_many(ts), expected, atol=1e-12)


class TestShadowDistance(unittest.TestCase):
    """Test cases for di_shadow_distance."""

    def test_zero_field(self):
        """Test a constant problem and constant trajectory give distance 0."""
        problem = make_l1_regression(np.zeros((3, 2)), np.zeros(3))
        xs = [[1.0, -1.0]] * 41
        self.assertEqual(di_shadow_distance(problem, xs, [0.1] * 40, window=1.0, h0=0.01), 0.0)

    def test_short_run(self):
        """Test runs shorter than two windows are rejected."""
        problem = make_l1_regression([[1.0]], [0.0])
        with self.assertRaises(InvalidParameterError):
            di_shadow_distance(problem, [[0.0]] * 5, [0.1] * 4, window=1.0, h0=0.01)

    def test_smooth_region_small_distance(self):
        """Test gradient descent far from kinks shadows its own flow within 10 eta0."""
        problem = make_l1_regression([[1.0, 0.0], [0.0, 1.0]], [-100.0, -100.0])
        eta0 = 0.01
        xs = [np.zeros(2)]
        for _ in range(400):
            xs.append(xs[-1] - eta0 * problem.full_selection(xs[-1]))
        distance = di_shadow_distance(problem, xs, [eta0] * 400, window=1.0, h0=1e-3)
        self.assertLessEqual(distance, 10 * eta0)


class TestProbeTracker(unittest.TestCase):
    """Test cases for the probe tracker."""

    def test_delta_window(self):
        """Test delta_k = M_a * sum_{i=k-w}^{k} eta_i with w = ceil(sqrt(k))."""
        problem = make_l1_regression([[1.0]], [0.0])
        schedule = StepsizeSchedule(eta_rule="constant", eta0=0.1)
        tracker = ProbeTracker(problem, PhiChoice(), schedule)
        self.assertEqual(tracker.delta(0), 0.0)
        for k in range(9):
            tracker.observe(np.array([0.0]), np.array([0.2 if k == 3 else 0.05]), 0.1)
        self.assertAlmostEqual(tracker.step_bound, 2.0)
        # k = 9: w = 3, observed eta_6 .. eta_8 plus eta_9 from the schedule
        self.assertAlmostEqual(tracker.delta(9), 2.0 * 0.4, places=12)

    def test_probe_fields(self):
        """Test a probe reports finite, non-negative distances."""
        problem = make_planted_l1_regression(20, 5, seed=0)
        schedule = StepsizeSchedule(regime="single", eta0=0.05, tau=1.0)
        tracker = ProbeTracker(problem, PhiChoice(), schedule)
        result = tracker.probe(0, np.ones(5), np.zeros(5))
        self.assertEqual(result.k, 0)
        self.assertEqual(result.delta, 0.0)
        self.assertGreaterEqual(result.stationarity, 0.0)
        self.assertGreaterEqual(result.momentum_gap, 0.0)
        self.assertAlmostEqual(result.lyapunov, problem.full_objective(np.ones(5)), places=12)

    def test_stationarity_radius_defaults_to_zero(self):
        """Test the stationarity column is dist(0, conv D_f(x)) and the delta version is reported apart."""
        problem = make_planted_l1_regression(20, 5, seed=0)
        schedule = StepsizeSchedule(regime="single", eta0=0.05, tau=1.0)
        x = np.random.default_rng(4).standard_normal(5)
        results = {}
        for radius in (0.0, "delta"):
            tracker = ProbeTracker(problem, PhiChoice(), schedule, stationarity_radius=radius)
            for k in range(16):
                tracker.observe(x, x + 0.5, schedule.eta(k))
            results[radius] = tracker.probe(16, x, np.zeros(5))
        plain, widened = results[0.0], results["delta"]
        self.assertGreater(plain.delta, 0.0)
        self.assertEqual(plain.stationarity, stationarity_measure(problem, x))
        self.assertEqual(plain.delta_stationarity, stationarity_measure(problem, x, radius=plain.delta))
        self.assertLessEqual(plain.delta_stationarity, plain.stationarity + 1e-9)
        self.assertEqual(widened.stationarity, plain.delta_stationarity)
        self.assertEqual(widened.delta_stationarity, plain.delta_stationarity)

    def test_network_has_no_gap(self):
        """Test network probes leave the momentum gap empty."""
        problem = make_relu_net([1, 1, 1], [[1.0]], [0.0])
        tracker = ProbeTracker(problem, PhiChoice(), StepsizeSchedule())
        result = tracker.probe(0, np.full(4, 0.5), np.zeros(4))
        self.assertIsNone(result.momentum_gap)
        self.assertTrue(result.stationarity_is_bound)


if __name__ == "__main__":
    unittest.main()
