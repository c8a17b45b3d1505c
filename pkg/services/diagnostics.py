"""Convergence diagnostics: min-norm points, stationarity, Lyapunov value, momentum gap, DI shadowing."""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import lsq_linear

from config import Config
from core.errors import HullUnavailableError, IndexOutOfRangeError, InvalidParameterError, TooManyKinksError
from core.fields import PhiChoice, as_vector
from core.problems import FiniteSumProblem, HullDescription, Zonotope
from core.schedules import TimeAccumulator
from utils.cache import BoundedCache, point_key
from utils.logger import get_logger


logger = get_logger(__name__)

MAX_WOLFE_ITERATIONS = 1000
BVLS_MIN_ITERATIONS = 1000
# Barycentric weights at or below this count as zero in the minor cycle.
WEIGHT_EPS = 1e-12
# Major cycles stop once x.x - x.p_j is below this fraction of max ||p||^2.
GAP_TOLERANCE = 1e-12


@dataclass
class ProbeResult:
    """
    Diagnostics at one probe; momentum_gap is None when the problem has no hull oracle.

    stationarity is measured at the tracker's configured radius (0 by default);
    delta_stationarity always uses the momentum-gap radius delta.
    """

    k: int
    stationarity: float
    stationarity_is_bound: bool
    lyapunov: float
    momentum_gap: Optional[float]
    delta: float
    delta_stationarity: float = math.nan


def _affine_min_norm(P: np.ndarray) -> np.ndarray:
    """Barycentric weights of the min-norm point of the affine hull of the rows of P."""
    s = P.shape[0]
    kkt = np.zeros((s + 1, s + 1))
    kkt[:s, :s] = P @ P.T
    kkt[:s, s] = 1.0
    kkt[s, :s] = 1.0
    rhs = np.zeros(s + 1)
    rhs[s] = 1.0
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:s]


def min_norm_in_hull(vertices: Union[HullDescription, np.ndarray], tol: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """
    Minimum-norm point of conv(vertices) by Wolfe's active-set algorithm.

    Ties in the linear subproblem go to the lowest vertex index. When the
    final norm is at most ``tol`` the hull is taken to contain the origin and
    an exact zero is returned.

    Args:
        vertices: HullDescription or k x n array
        tol: norm at or below which the origin counts as inside (defaults to Config.MIN_NORM_TOLERANCE)

    Returns:
        (point, norm)
    """
    tol = Config.MIN_NORM_TOLERANCE if tol is None else tol
    if tol <= 0.0:
        raise InvalidParameterError(f"tolerance must be positive, got {tol}")
    P = vertices.vertices if isinstance(vertices, HullDescription) else np.atleast_2d(np.asarray(vertices, dtype=np.float64))
    n = P.shape[1]
    scale = max(1.0, float(np.max(np.sum(P * P, axis=1))))

    first = int(np.argmin(np.sum(P * P, axis=1)))
    active = [first]
    weights = np.array([1.0])
    x = P[first].copy()

    for _ in range(MAX_WOLFE_ITERATIONS):
        j = int(np.argmin(P @ x))
        gap = float(x @ x - x @ P[j])
        if gap <= GAP_TOLERANCE * scale or j in active or len(active) > n + 1:
            break
        active.append(j)
        weights = np.append(weights, 0.0)
        while True:
            v = _affine_min_norm(P[active])
            if np.all(v > WEIGHT_EPS):
                weights = v
                break
            mask = v <= WEIGHT_EPS
            denom = weights[mask] - v[mask]
            ratios = np.where(denom > 0.0, weights[mask] / np.where(denom > 0.0, denom, 1.0), 0.0)
            step = min(1.0, max(0.0, float(np.min(ratios)))) if ratios.size else 0.0
            weights = (1.0 - step) * weights + step * v
            keep = weights > WEIGHT_EPS
            if keep.all():
                keep[int(np.argmin(weights))] = False
            active = [a for a, kept in zip(active, keep) if kept]
            weights = weights[keep]
            weights = weights / weights.sum()
        x = weights @ P[active]
    else:
        logger.warning(f"Wolfe min-norm stopped after {MAX_WOLFE_ITERATIONS} major cycles")

    norm = float(np.linalg.norm(x))
    if norm <= tol:
        return np.zeros(n), 0.0
    return x, norm


def min_norm_in_zonotope(zonotope: Zonotope, tol: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """
    Minimum-norm point of a zonotope, exactly, as box-constrained least squares.

    min ||c + G^T s|| subject to -1 <= s <= 1, solved with scipy's bounded
    variable least squares; no vertex enumeration, so no kink cap.
    """
    tol = Config.MIN_NORM_TOLERANCE if tol is None else tol
    if zonotope.kinks == 0:
        point = zonotope.center.copy()
    else:
        generators = zonotope.generators
        result = lsq_linear(
            generators.T,
            -zonotope.center,
            bounds=(-1.0, 1.0),
            method="bvls",
            tol=1e-12,
            max_iter=max(BVLS_MIN_ITERATIONS, 10 * generators.shape[0]),
        )
        if result.status not in (1, 2, 3):
            logger.warning(f"Zonotope min-norm stopped early ({zonotope.kinks} kinks): {result.message}")
        point = zonotope.center + zonotope.generators.T @ result.x
    norm = float(np.linalg.norm(point))
    if norm <= tol:
        return np.zeros_like(point), 0.0
    return point, norm


def _zonotope_min_norm(zonotope: Zonotope, tol: Optional[float] = None) -> float:
    if zonotope.kinks <= Config.HULL_KINK_CAP:
        return min_norm_in_hull(zonotope.vertices(), tol)[1]
    return min_norm_in_zonotope(zonotope, tol)[1]


def stationarity_probe(problem: FiniteSumProblem, x, radius: float = 0.0) -> Tuple[float, bool]:
    """
    dist(0, conv(D_f(x))) and whether it is only an upper bound.

    With radius > 0 the hull covers every selection within that distance of x.
    Problems without a hull oracle fall back to the smallest full selection
    over Config.SAMPLED_STATIONARITY_COUNT selection variants (an upper bound).
    """
    if problem.has_hull:
        return _zonotope_min_norm(problem.zonotope_at(x, radius)), False
    variants = problem.selection_variants(Config.SAMPLED_STATIONARITY_COUNT)
    best = min(float(np.linalg.norm(v.full_selection(x))) for v in variants)
    return best, True


def stationarity_measure(problem: FiniteSumProblem, x, radius: float = 0.0) -> float:
    return stationarity_probe(problem, x, radius)[0]


def lyapunov_h(problem: FiniteSumProblem, x, m, phi: PhiChoice, tau: float) -> float:
    """h(x, m) = f(x) + phi(m) / tau."""
    if not tau > 0.0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    return problem.full_objective(x) + phi.value(m) / tau


def _distance_to_cover(problem: FiniteSumProblem, x, m: np.ndarray, delta: float) -> float:
    z = problem.zonotope_at(x, delta)
    return _zonotope_min_norm(Zonotope(z.center - m, z.generators))


def momentum_gap(problem: FiniteSumProblem, x, m, delta: float, method: str = "axis") -> float:
    """
    Distance from m to an approximation of conv(D_f^delta(x)), reduced by delta and floored at 0.

    "axis": conv of the hulls at x and at the 2n points x +- delta e_i (an
    inner approximation). Falls back to "cover" when a sampled hull is too
    large to enumerate.
    "cover": the zonotope of every term whose kink lies within delta of x
    (an outer approximation).

    Raises:
        HullUnavailableError: the problem has no hull oracle
    """
    if not problem.has_hull:
        raise HullUnavailableError(f"{problem.name} exposes no hull oracle")
    if delta < 0.0:
        raise InvalidParameterError(f"delta must be >= 0, got {delta}")
    x = problem.check_point(x)
    m = as_vector(m, "m")
    if method == "cover":
        return max(0.0, _distance_to_cover(problem, x, m, delta) - delta)
    if method != "axis":
        raise InvalidParameterError(f"unknown momentum-gap method {method!r}")

    points = [x]
    if delta > 0.0:
        for i in range(problem.dimension):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[i] += sign * delta
                points.append(y)
    try:
        vertices = np.vstack([problem.zonotope_at(p).vertices().vertices for p in points])
    except TooManyKinksError:
        logger.debug("axis-sampled hull too large, using the covering zonotope")
        return max(0.0, _distance_to_cover(problem, x, m, delta) - delta)
    distance = min_norm_in_hull(vertices - m[None, :])[1]
    return max(0.0, distance - delta)


class ProbeTracker:
    """
    Periodic diagnostics for a run.

    Keeps the running step-magnitude bound M_a = max ||x_{k+1} - x_k|| / eta_k
    and the stepsize history to set delta_k = M_a * sum_{i=k-w}^{k} eta_i with
    w = ceil(sqrt(k)). The history holds eta_0..eta_{k-1}; eta_k comes from
    the schedule.
    """

    def __init__(
        self,
        problem: FiniteSumProblem,
        phi: PhiChoice,
        schedule,
        stationarity_radius: Union[str, float] = 0.0,
        gap_method: str = "axis",
    ):
        self.problem = problem
        self.phi = phi
        self.schedule = schedule
        self.stationarity_radius = stationarity_radius
        self.gap_method = gap_method
        self.step_bound = 0.0
        self._etas: List[float] = []
        self._cache: BoundedCache[float] = BoundedCache(Config.HULL_CACHE_SIZE)

    def observe(self, x_old: np.ndarray, x_new: np.ndarray, eta: float) -> None:
        self._etas.append(eta)
        if eta > 0.0:
            self.step_bound = max(self.step_bound, float(np.linalg.norm(x_new - x_old)) / eta)

    def delta(self, k: int) -> float:
        if k == 0 or not self._etas:
            return 0.0
        window = math.ceil(math.sqrt(k))
        lo = max(0, k - window)
        return self.step_bound * (math.fsum(self._etas[lo:k]) + self.schedule.eta(k))

    def _stationarity(self, x: np.ndarray, radius: float) -> Tuple[float, bool]:
        return self._cache.get_or_compute(
            point_key(x, "stationarity", radius), lambda: stationarity_probe(self.problem, x, radius)
        )

    def probe(self, k: int, x: np.ndarray, m: np.ndarray) -> ProbeResult:
        delta = self.delta(k)
        radius = delta if self.stationarity_radius == "delta" else float(self.stationarity_radius)
        stationarity, is_bound = self._stationarity(x, radius)
        # without a hull oracle the radius has no effect
        delta_stationarity = self._stationarity(x, delta)[0] if self.problem.has_hull else stationarity
        eta_k = self.schedule.eta(k)
        tau = self.schedule.theta(k) / eta_k
        lyapunov = lyapunov_h(self.problem, x, m, self.phi, tau)
        gap = momentum_gap(self.problem, x, m, delta, self.gap_method) if self.problem.has_hull else None
        return ProbeResult(k, stationarity, is_bound, lyapunov, gap, delta, delta_stationarity)


class InterpolatedPath:
    """
    Piecewise-linear path through x_0..x_K with segment i of duration eta_i.

    x(t) = x_i + (t - lambda(i)) / eta_i * (x_{i+1} - x_i) for lambda(i) <= t < lambda(i+1).
    """

    def __init__(self, xs: Sequence, etas: Sequence[float]):
        self.xs = np.asarray([as_vector(x, "x") for x in xs])
        self.etas = np.asarray(etas, dtype=np.float64)
        if self.etas.size != self.xs.shape[0] - 1:
            raise InvalidParameterError(
                f"need len(etas) = len(xs) - 1, got {self.etas.size} and {self.xs.shape[0]}"
            )
        self.accumulator = TimeAccumulator(self.etas)
        self.times = np.asarray([self.accumulator.lam(i) for i in range(self.etas.size + 1)])

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def __call__(self, t: float) -> np.ndarray:
        """
        Evaluate the path; t = end_time returns the last iterate.

        Raises:
            IndexOutOfRangeError: t outside [0, end_time]
        """
        if not 0.0 <= t <= self.end_time:
            raise IndexOutOfRangeError(f"t={t} outside [0, {self.end_time}]")
        if t == self.end_time:
            return self.xs[-1].copy()
        i = self.accumulator.Lam(t)
        return self.xs[i] + (t - self.times[i]) / self.etas[i] * (self.xs[i + 1] - self.xs[i])

    def evaluate_many(self, ts: np.ndarray) -> np.ndarray:
        ts = np.clip(np.asarray(ts, dtype=np.float64), 0.0, self.end_time)
        idx = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, self.etas.size - 1)
        frac = (ts - self.times[idx]) / self.etas[idx]
        return self.xs[idx] + frac[:, None] * (self.xs[idx + 1] - self.xs[idx])


def interpolated_process(xs: Sequence, etas: Sequence[float]) -> InterpolatedPath:
    return InterpolatedPath(xs, etas)


def di_shadow_distance(
    problem: FiniteSumProblem,
    trajectory: Sequence,
    etas: Sequence[float],
    window: float,
    h0: float,
    alpha: float = 0.0,
    probes: Optional[int] = None,
) -> float:
    """
    How far the interpolated iterates stray from Euler solutions of dx/dt = -(1+alpha) D_f(x).

    From each of ``probes`` times evenly spaced in the second half of the run,
    Euler with step h0 (field = full_selection) starts at x(t); the result is
    the max over probes of the sup over the Euler grid on [t, t + window] of
    ||euler(s) - x(s)||.

    Raises:
        InvalidParameterError: window or h0 not positive, or the run shorter than 2 * window
    """
    probes = Config.SHADOW_PROBES if probes is None else probes
    if not (window > 0.0 and h0 > 0.0):
        raise InvalidParameterError("window and h0 must be positive")
    path = InterpolatedPath(trajectory, etas)
    end = path.end_time
    if end < 2.0 * window:
        raise InvalidParameterError(f"run covers time {end:.4g}, need at least {2.0 * window}")
    n_steps = int(round(window / h0))
    worst = 0.0
    for t in np.linspace(end / 2.0, end - window, probes):
        y = path(float(t))
        euler = np.empty((n_steps + 1, y.size))
        euler[0] = y
        for j in range(n_steps):
            y = y - h0 * (1.0 + alpha) * problem.full_selection(y)
            euler[j + 1] = y
        grid = float(t) + h0 * np.arange(n_steps + 1)
        deviation = np.linalg.norm(euler - path.evaluate_many(grid), axis=1)
        worst = max(worst, float(deviation.max()))
    logger.info(f"DI shadow distance over window {window}: {worst:.6g}")
    return worst
