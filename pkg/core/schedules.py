"""Stepsize schedules (eta_k, theta_k), time accumulators and assumption validators."""
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from utils.logger import get_logger

from .errors import IndexOutOfRangeError, InvalidParameterError


logger = get_logger(__name__)

REGIMES = ("single", "two", "fixed")
ETA_RULES = ("power", "loglog", "constant")

# Rule kinds whose sum diverges and whose eta_k * log(k) -> 0, known in closed form.
SYMBOLIC_DIVERGENT = ("power", "loglog", "constant")
SYMBOLIC_LOG_DECAY = ("power", "loglog")

TREND_TOLERANCE = 0.1


@dataclass(frozen=True)
class StepsizeSchedule:
    """
    Paired generators for eta_k and theta_k.

    Attributes:
        regime: "single" (theta = tau * eta), "two" (theta = sqrt(eta / log(k+2)))
            or "fixed" (theta = theta0)
        eta_rule: "power" (eta0/(k+1)^p), "loglog" (eta0/(log(k+2) log(log(k+3))))
            or "constant" (eta0)
        eta0: base stepsize
        p: exponent of the power rule, in (0, 1]
        tau: single-timescale ratio
        theta0: fixed-regime momentum stepsize
        c: scaling applied to both sequences
        eta_cap: optional upper bound on eta_k
    """

    regime: str = "single"
    eta_rule: str = "power"
    eta0: float = 0.1
    p: float = 0.5
    tau: float = 1.0
    theta0: float = 0.1
    c: float = 1.0
    eta_cap: Optional[float] = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise InvalidParameterError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.eta_rule not in ETA_RULES:
            raise InvalidParameterError(f"eta rule must be one of {ETA_RULES}, got {self.eta_rule!r}")
        if not self.eta0 > 0.0:
            raise InvalidParameterError(f"eta0 must be positive, got {self.eta0}")
        if self.eta_rule == "power" and not 0.0 < self.p <= 1.0:
            raise InvalidParameterError(f"power exponent must lie in (0, 1], got {self.p}")
        if self.regime == "single" and not self.tau > 0.0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if self.regime == "fixed" and not self.theta0 > 0.0:
            raise InvalidParameterError(f"theta0 must be positive, got {self.theta0}")
        if not self.c > 0.0:
            raise InvalidParameterError(f"scaling c must be positive, got {self.c}")
        if self.eta_cap is not None and not self.eta_cap > 0.0:
            raise InvalidParameterError(f"eta cap must be positive, got {self.eta_cap}")

    def _nu(self, k):
        """Unscaled eta rule; works on ints and integer arrays."""
        k = np.asarray(k, dtype=np.float64)
        if self.eta_rule == "power":
            return self.eta0 / np.power(k + 1.0, self.p)
        if self.eta_rule == "loglog":
            return self.eta0 / (np.log(k + 2.0) * np.log(np.log(k + 3.0)))
        return np.full_like(k, self.eta0)

    def eta_array(self, ks) -> np.ndarray:
        values = self.c * self._nu(ks)
        if self.eta_cap is not None:
            values = np.minimum(values, self.eta_cap)
        return values

    def raw_theta_array(self, ks) -> np.ndarray:
        """theta before clamping to 1."""
        ks = np.asarray(ks, dtype=np.float64)
        if self.regime == "single":
            return self.tau * self.eta_array(ks)
        if self.regime == "two":
            return self.c * np.sqrt(self._nu(ks) / np.log(ks + 2.0))
        return np.full_like(ks, self.c * self.theta0)

    def theta_array(self, ks) -> np.ndarray:
        return np.minimum(self.raw_theta_array(ks), 1.0)

    def eta(self, k: int) -> float:
        return float(self.eta_array(k))

    def theta(self, k: int) -> float:
        return float(self.theta_array(k))

    def theta_clamped(self, k: int) -> bool:
        return bool(self.raw_theta_array(k) > 1.0)

    def to_dict(self) -> Dict:
        return asdict(self)


def eta(schedule: StepsizeSchedule, k: int) -> float:
    return schedule.eta(k)


def theta(schedule: StepsizeSchedule, k: int) -> float:
    return schedule.theta(k)


Sequenceish = Union[Sequence[float], np.ndarray, Callable[[int], float]]


class TimeAccumulator:
    """
    lambda(i) = sum_{k<i} seq_k and its inverse Lambda(t).

    Wraps either a finite sequence or a callable k -> seq_k; for callables the
    partial sums are extended on demand.
    """

    def __init__(self, seq: Sequenceish):
        self._callable = seq if callable(seq) else None
        values = [] if self._callable else list(np.asarray(seq, dtype=np.float64))
        self._values: List[float] = values
        self._sums: List[float] = [0.0]
        self._extend_sums(len(values))

    def _extend_sums(self, upto: int) -> None:
        while len(self._values) < upto:
            if self._callable is None:
                raise IndexOutOfRangeError(f"sequence has only {len(self._values)} entries, need {upto}")
            self._values.append(float(self._callable(len(self._values))))
        total = self._sums[-1]
        for v in self._values[len(self._sums) - 1:upto]:
            total += v
            self._sums.append(total)

    def lam(self, i: int) -> float:
        if i < 0:
            raise IndexOutOfRangeError(f"lambda index must be >= 0, got {i}")
        self._extend_sums(i)
        return self._sums[i]

    def Lam(self, t: float) -> int:
        """Unique p with lambda(p) <= t < lambda(p+1)."""
        if t < 0:
            raise IndexOutOfRangeError(f"time must be >= 0, got {t}")
        while self._sums[-1] <= t:
            if self._callable is None:
                raise IndexOutOfRangeError(f"time {t} lies beyond lambda(len) = {self._sums[-1]}")
            self._extend_sums(max(2 * len(self._values), 16))
        sums = np.asarray(self._sums)
        return int(np.searchsorted(sums, t, side="right")) - 1


def lambda_acc(seq: Sequenceish, i: int) -> float:
    return TimeAccumulator(seq).lam(i)


def Lambda_inv(seq: Sequenceish, t: float) -> int:
    return TimeAccumulator(seq).Lam(t)


def geometric_weight_identity_check(thetas: Sequence[float], k: int, l: int):
    """
    Evaluate both sides of the geometric-weight identity by direct loops.

    lhs = theta_k + sum_{i=0}^{l} theta_{k-i-1} prod_{j=k-i}^{k} (1 - theta_j)
    rhs = 1 - prod_{j=k-l-1}^{k} (1 - theta_j)

    Entries before index 0 are treated as theta = 0 (no history), which makes
    l = k admissible.

    Raises:
        IndexOutOfRangeError: k beyond the list, or l outside [0, k]
    """
    if not 0 <= k < len(thetas):
        raise IndexOutOfRangeError(f"k={k} outside [0, {len(thetas)})")
    if not 0 <= l <= k:
        raise IndexOutOfRangeError(f"l={l} outside [0, {k}]")

    def th(j: int) -> float:
        return float(thetas[j]) if j >= 0 else 0.0

    lhs = th(k)
    for i in range(l + 1):
        weight = 1.0
        for j in range(k - i, k + 1):
            weight *= 1.0 - th(j)
        lhs += th(k - i - 1) * weight

    product = 1.0
    for j in range(k - l - 1, k + 1):
        product *= 1.0 - th(j)
    rhs = 1.0 - product
    return lhs, rhs


@dataclass
class AssumptionCheck:
    name: str
    status: str  # "pass", "fail" or "flag"
    detail: str
    symbolic: bool = False


@dataclass
class ValidationReport:
    """Outcome of validate(); metrics are numeric trend diagnostics over the horizon."""

    horizon: int
    checks: List[AssumptionCheck] = field(default_factory=list)
    metrics: Dict[str, float] = field(default_factory=dict)
    ratio_class: str = ""
    tau_hat: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    @property
    def flags(self) -> List[str]:
        return [c.detail for c in self.checks if c.status == "flag"]

    def lines(self) -> List[str]:
        out = [f"horizon K={self.horizon}"]
        for name, value in self.metrics.items():
            out.append(f"  {name} = {value:.6g}")
        out.append(f"  eta/theta ratio: {self.ratio_class}")
        for check in self.checks:
            tag = "symbolic" if check.symbolic else "numeric"
            out.append(f"[{check.status.upper()}] {check.name} ({tag}): {check.detail}")
        return out


def _classify_ratio(schedule: StepsizeSchedule, ks: np.ndarray):
    ratio = schedule.eta_array(ks) / schedule.theta_array(ks)
    if np.allclose(ratio, ratio[0], rtol=1e-9, atol=0.0):
        if schedule.regime == "single":
            return "->tau", float(1.0 / ratio[-1])
        return "constant", None
    if ratio[-1] < ratio[0] and np.all(np.diff(ratio) <= 1e-15):
        return "->0", None
    return "other", None


def validate(schedule: StepsizeSchedule, horizon: int) -> ValidationReport:
    """
    Check the stepsize assumptions numerically over [0, horizon].

    Divergence of sum(eta) cannot be observed at a finite horizon, so that
    check is symbolic by rule kind; the partial sum and its growth over the
    second half are reported alongside.

    Raises:
        InvalidParameterError: horizon < 100
    """
    if horizon < 100:
        raise InvalidParameterError(f"validation horizon must be >= 100, got {horizon}")
    report = ValidationReport(horizon=horizon)
    ks = np.arange(horizon + 1)
    etas = schedule.eta_array(ks)
    half = horizon // 2

    partial = math.fsum(etas[:horizon])
    report.metrics["lambda_eta(K)"] = partial
    report.metrics["lambda growth over [K/2, K]"] = math.fsum(etas[half:horizon])
    report.checks.append(AssumptionCheck(
        "sum eta_k = infinity",
        "pass" if schedule.eta_rule in SYMBOLIC_DIVERGENT else "fail",
        f"asymptotic, verified symbolically by rule kind ({schedule.eta_rule})",
        symbolic=True,
    ))

    tail = ks[max(half, 2):]
    decay = etas[tail] * np.log(tail)
    slope = float(np.polyfit(np.log(tail), decay, 1)[0]) if tail.size > 1 else 0.0
    report.metrics["max eta_k log k on [K/2, K]"] = float(decay.max())
    report.metrics["eta_k log k trend slope"] = slope
    decreasing = bool(decay[-1] < decay[0])
    numeric_ok = decreasing and float(decay.max()) < TREND_TOLERANCE
    if schedule.eta_rule in SYMBOLIC_LOG_DECAY:
        status, symbolic = "pass", not numeric_ok
        detail = "trend decreasing" if decreasing else "trend not yet decreasing"
        if not numeric_ok:
            detail += f"; value above {TREND_TOLERANCE} at this horizon, passes by rule kind"
    else:
        status, symbolic = "fail", False
        detail = "eta_k does not diminish"
    report.checks.append(AssumptionCheck("eta_k log k -> 0", status, detail, symbolic=symbolic))

    ratio_class, tau_hat = _classify_ratio(schedule, tail)
    report.ratio_class = ratio_class
    report.tau_hat = tau_hat
    if schedule.regime == "single":
        ok = ratio_class == "->tau" and tau_hat is not None and math.isclose(tau_hat, schedule.tau, rel_tol=1e-9)
        report.checks.append(AssumptionCheck(
            "theta_k / eta_k = tau",
            "pass" if ok else "fail",
            f"tau_hat = {tau_hat}" if tau_hat is not None else f"ratio {ratio_class}",
        ))
    else:
        ratio = etas[tail] / schedule.theta_array(tail)
        report.metrics["eta_K / theta_K"] = float(ratio[-1])
        report.checks.append(AssumptionCheck(
            "limsup eta_k / theta_k = 0",
            "pass" if ratio_class == "->0" else "fail",
            f"ratio {ratio_class}, tail value {ratio[-1]:.3g}",
        ))
    if schedule.regime == "fixed":
        report.checks.append(AssumptionCheck(
            "theta_k -> 0", "flag", "theta does not diminish - released-solver baseline"
        ))

    clamped = np.flatnonzero(schedule.raw_theta_array(ks) > 1.0)
    if clamped.size:
        report.checks.append(AssumptionCheck(
            "theta_k <= 1", "flag", f"theta clamped to 1 at {clamped.size} indices (first k={clamped[0]})"
        ))

    logger.info(f"Validated {schedule.regime}/{schedule.eta_rule} schedule: passed={report.passed}")
    return report
