"""GSGD iteration engine: the five method steppers and the finite-sum loop."""
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from config import Config
from core.errors import DivergenceError, InvalidInputError, InvalidParameterError
from core.fields import METHOD_PHI, PhiChoice, TiePolicy, clip_select, regu_select, sign_select
from core.problems import FiniteSumProblem
from core.schedules import StepsizeSchedule
from utils.logger import get_logger
from utils.rate_limit import ProgressThrottle


logger = get_logger(__name__)

METHODS = tuple(METHOD_PHI)
NOISE_MODELS = ("none", "uniform")
BATCH_MODES = ("sample", "full")
LION_TAU_RULES = ("theta", "power")


def on_log_grid(k: int) -> bool:
    """True for k = d * 10^e with d in 1..9."""
    while k % 10 == 0:
        k //= 10
    return k < 10


@dataclass(frozen=True)
class GsgdConfig:
    """
    Everything one run of the GSGD loop needs besides the problem.

    Attributes:
        method: heavy-ball, signsgd, lion, normalized or clipped
        schedule: eta_k / theta_k generator
        alpha: Nesterov parameter in x' = x - eta (D_phi(m') + alpha g)
        C: clip level (clipped only)
        tie: tie policy of the sign/regu selections
        lion_tau: "theta" (tau_k = theta_k) or "power" (lion_tau0 / (k+1)^lion_tau_p)
        noise: "none" or "uniform" with bound noise_level
        seed: run RNG seed
        horizon: number of steps K
        probe_period: diagnostics every this many steps
        log_probes: also probe at k = d * 10^e (d = 1..9) so early decades are sampled
        batch: "sample" draws one component per step, "full" uses the full selection
        x0: explicit start point; drawn as x0_scale * N(0, I) from the run RNG when absent
    """

    method: str = "heavy-ball"
    schedule: StepsizeSchedule = field(default_factory=StepsizeSchedule)
    alpha: float = 0.0
    C: Optional[float] = None
    tie: str = TiePolicy.ZERO.value
    lion_tau: str = "theta"
    lion_tau0: float = 0.1
    lion_tau_p: float = 0.5
    noise: str = "none"
    noise_level: float = 0.0
    seed: int = 0
    horizon: int = 1000
    probe_period: int = Config.PROBE_PERIOD
    log_probes: bool = False
    batch: str = "sample"
    x0: Optional[Tuple[float, ...]] = None
    x0_scale: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.alpha < 0.0:
            raise InvalidParameterError(f"alpha must be >= 0, got {self.alpha}")
        if self.method == "clipped" and (self.C is None or not self.C > 0.0):
            raise InvalidParameterError(f"clipped SGD needs a positive clip level C, got {self.C}")
        TiePolicy(self.tie)
        if self.lion_tau not in LION_TAU_RULES:
            raise InvalidParameterError(f"lion_tau must be one of {LION_TAU_RULES}, got {self.lion_tau!r}")
        if self.noise not in NOISE_MODELS:
            raise InvalidParameterError(f"noise must be one of {NOISE_MODELS}, got {self.noise!r}")
        if self.noise_level < 0.0:
            raise InvalidParameterError(f"noise level must be >= 0, got {self.noise_level}")
        if self.horizon < 0 or self.probe_period < 1:
            raise InvalidParameterError("horizon must be >= 0 and probe period >= 1")
        if self.batch not in BATCH_MODES:
            raise InvalidParameterError(f"batch must be one of {BATCH_MODES}, got {self.batch!r}")
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))

    @property
    def phi(self) -> PhiChoice:
        return PhiChoice.from_method(self.method, self.C, TiePolicy(self.tie))

    def probes_at(self, k: int) -> bool:
        if k % self.probe_period == 0 or k == self.horizon:
            return True
        return self.log_probes and k > 0 and on_log_grid(k)

    def lion_tau_at(self, k: int, theta_k: float) -> float:
        if self.lion_tau == "theta":
            return theta_k
        return min(1.0, self.lion_tau0 / (k + 1.0) ** self.lion_tau_p)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["x0"] = list(self.x0) if self.x0 is not None else None
        return data


@dataclass
class OptimizerState:
    """(x_k, m_k), the counter k and the RNG stream the run owns."""

    x: np.ndarray
    m: np.ndarray
    k: int
    rng: np.random.Generator


@dataclass
class StepInfo:
    """What one step consumed: the stochastic selection and the stepsizes."""

    g: np.ndarray
    eta: float
    theta: float
    component: Optional[int]


def average_momentum(m: np.ndarray, g: np.ndarray, theta: float) -> np.ndarray:
    """m' = (1 - theta) m + theta g."""
    return (1.0 - theta) * m + theta * g


def _move(x: np.ndarray, direction: np.ndarray, g: np.ndarray, eta: float, alpha: float) -> np.ndarray:
    if alpha == 0.0:
        return x - eta * direction
    return x - eta * (direction + alpha * g)


def step_heavy_ball(x, m, g, eta: float, theta: float, alpha: float = 0.0):
    m_new = average_momentum(m, g, theta)
    return _move(x, m_new, g, eta, alpha), m_new


def step_signsgd(x, m, g, eta: float, theta: float, tie=TiePolicy.ZERO, rng=None, alpha: float = 0.0):
    m_new = average_momentum(m, g, theta)
    return _move(x, sign_select(m_new, tie, rng), g, eta, alpha), m_new


def step_lion(x, m, g, eta: float, theta: float, tau: float, tie=TiePolicy.ZERO, rng=None, alpha: float = 0.0):
    """The x-direction uses the interpolation v = (1 - tau) m + tau g; m itself averages with theta."""
    v = average_momentum(m, g, tau)
    x_new = _move(x, sign_select(v, tie, rng), g, eta, alpha)
    return x_new, average_momentum(m, g, theta)


def step_normalized(x, m, g, eta: float, theta: float, tie=TiePolicy.ZERO, rng=None, alpha: float = 0.0):
    m_new = average_momentum(m, g, theta)
    return _move(x, regu_select(m_new, tie, rng), g, eta, alpha), m_new


def step_clipped(x, m, g, eta: float, theta: float, C: float, alpha: float = 0.0):
    m_new = average_momentum(m, g, theta)
    return _move(x, clip_select(m_new, C), g, eta, alpha), m_new


def gsgd_step(x, m, g, eta: float, theta: float, phi: PhiChoice, alpha: float = 0.0, rng=None):
    """Generic momentum-first step: x' = x - eta (D_phi(m') + alpha g) for any potential."""
    m_new = average_momentum(m, g, theta)
    return _move(x, phi.select(m_new, rng), g, eta, alpha), m_new


def g_mapping(g: np.ndarray, m: np.ndarray, phi: PhiChoice, alpha: float = 0.0, rng=None):
    """One element (d_x, d_m) of G(x, m) = [D_phi(m) + alpha d ; m - d] for the selection d = g."""
    return phi.select(m, rng) + alpha * g, m - g


def framework_step(x, m, d_x, d_m, eta: float, theta: float, xi_x=0.0, xi_m=0.0):
    """The literal (GSGD) update x' = x - eta (d_x + xi_x), m' = m - theta (d_m + xi_m)."""
    return x - eta * (d_x + xi_x), m - theta * (d_m + xi_m)


@dataclass
class RunRecord:
    """
    Per-run log: one row per state x_0 .. x_K and one probe per S steps.

    rows hold (k, f(x_k), ||m_k||, eta_k, theta_k).
    """

    config: Dict
    rows: List[Tuple[int, float, float, float, float]] = field(default_factory=list)
    probes: List = field(default_factory=list)
    x: Optional[np.ndarray] = None
    m: Optional[np.ndarray] = None
    k: int = 0
    diverged: bool = False
    message: str = ""
    bound_violations: int = 0
    theta_clamps: int = 0
    trajectory: Optional[List[np.ndarray]] = None
    etas: Optional[List[float]] = None

    @property
    def terminal_f(self) -> float:
        return self.rows[-1][1] if self.rows else math.nan

    @property
    def terminal_stationarity(self) -> float:
        return self.probes[-1].stationarity if self.probes else math.nan


class GsgdOptimizer:
    """Runs one GSGD method on one finite-sum problem."""

    def __init__(self, problem: FiniteSumProblem, config: GsgdConfig):
        """
        Initialize the engine.

        Args:
            problem: finite-sum problem providing component oracles
            config: method, schedule, noise and run parameters
        """
        self.problem = problem
        self.config = config
        self.schedule = config.schedule
        self.phi = config.phi
        self.tie = TiePolicy(config.tie)
        self.throttle = ProgressThrottle(Config.PROGRESS_LOG_INTERVAL_SECONDS)
        self._steppers: Dict[str, Callable] = {
            "heavy-ball": self.step_heavy_ball,
            "signsgd": self.step_signsgd,
            "lion": self.step_lion,
            "normalized": self.step_normalized,
            "clipped": self.step_clipped,
        }
        logger.info(
            f"GsgdOptimizer ready: {config.method} on {problem.name} "
            f"(N={problem.n_components}, n={problem.dimension}), regime={self.schedule.regime}"
        )

    def initial_state(self) -> OptimizerState:
        rng = np.random.default_rng(self.config.seed)
        if self.config.x0 is not None:
            x0 = self.problem.check_point(self.config.x0).copy()
        else:
            x0 = self.config.x0_scale * rng.standard_normal(self.problem.dimension)
        return OptimizerState(x=x0, m=np.zeros(self.problem.dimension), k=0, rng=rng)

    def sample_component(self, state: OptimizerState) -> int:
        """Uniform index in [1, N] from the run RNG; advances the stream."""
        return int(state.rng.integers(1, self.problem.n_components + 1))

    def draw_noise(self, state: OptimizerState) -> np.ndarray:
        """Zero, or i.i.d. uniform coordinates on [-M/sqrt(n), M/sqrt(n)] so that ||xi|| <= M."""
        n = self.problem.dimension
        if self.config.noise == "none" or self.config.noise_level == 0.0:
            return np.zeros(n)
        half_width = self.config.noise_level / math.sqrt(n)
        return state.rng.uniform(-half_width, half_width, size=n)

    def stochastic_selection(self, state: OptimizerState) -> Tuple[np.ndarray, Optional[int]]:
        """g_k = selection of D_{f_i}(x_k) for a sampled i (or the full selection) plus noise."""
        if self.config.batch == "full":
            component = None
            g = self.problem.full_selection(state.x)
        else:
            component = self.sample_component(state)
            g = self.problem.component_selection(component - 1, state.x)
        return g + self.draw_noise(state), component

    def step_heavy_ball(self, state, g, eta, theta):
        return step_heavy_ball(state.x, state.m, g, eta, theta, self.config.alpha)

    def step_signsgd(self, state, g, eta, theta):
        return step_signsgd(state.x, state.m, g, eta, theta, self.tie, state.rng, self.config.alpha)

    def step_lion(self, state, g, eta, theta):
        tau = self.config.lion_tau_at(state.k, theta)
        return step_lion(state.x, state.m, g, eta, theta, tau, self.tie, state.rng, self.config.alpha)

    def step_normalized(self, state, g, eta, theta):
        return step_normalized(state.x, state.m, g, eta, theta, self.tie, state.rng, self.config.alpha)

    def step_clipped(self, state, g, eta, theta):
        return step_clipped(state.x, state.m, g, eta, theta, self.config.C, self.config.alpha)

    def advance(self, state: OptimizerState) -> Tuple[OptimizerState, StepInfo]:
        """
        One step: sample, noise, momentum update, x update.

        Raises:
            InvalidInputError: state dimension does not match the problem
            DivergenceError: non-finite iterate or ||x|| above the divergence bound
        """
        if state.x.size != self.problem.dimension or state.m.size != self.problem.dimension:
            raise InvalidInputError("state dimension does not match the problem")
        eta = self.schedule.eta(state.k)
        theta = self.schedule.theta(state.k)
        g, component = self.stochastic_selection(state)
        x_new, m_new = self._steppers[self.config.method](state, g, eta, theta)
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(m_new))):
            raise DivergenceError(f"non-finite iterate at k={state.k + 1}", last_state=state, k=state.k + 1)
        if np.linalg.norm(x_new) > Config.DIVERGENCE_BOUND:
            raise DivergenceError(
                f"||x|| exceeded {Config.DIVERGENCE_BOUND:g} at k={state.k + 1}", last_state=state, k=state.k + 1
            )
        new_state = OptimizerState(x=x_new, m=m_new, k=state.k + 1, rng=state.rng)
        return new_state, StepInfo(g=g, eta=eta, theta=theta, component=component)

    def step(self, state: OptimizerState) -> OptimizerState:
        return self.advance(state)[0]

    def run(self, prober=None, record_trajectory: bool = False, state: Optional[OptimizerState] = None) -> RunRecord:
        """
        Execute the configured horizon and log every state.

        Args:
            prober: optional diagnostics tracker with observe(...) and probe(...)
            record_trajectory: keep x_0..x_K and the stepsizes used
            state: start state (defaults to initial_state())

        Returns:
            RunRecord; on divergence the record is partial and flagged
        """
        cfg = self.config
        state = state or self.initial_state()
        record = RunRecord(config=cfg.to_dict())
        if record_trajectory:
            record.trajectory = [state.x.copy()]
            record.etas = []
        momentum_bound = float(np.linalg.norm(state.m))
        clamp_warned = False

        def log_row(s: OptimizerState) -> None:
            record.rows.append((
                s.k,
                self.problem.full_objective(s.x),
                float(np.linalg.norm(s.m)),
                self.schedule.eta(s.k),
                self.schedule.theta(s.k),
            ))

        log_row(state)
        if prober is not None:
            record.probes.append(prober.probe(state.k, state.x, state.m))

        try:
            while state.k < cfg.horizon:
                new_state, info = self.advance(state)
                if self.schedule.theta_clamped(state.k):
                    record.theta_clamps += 1
                    if not clamp_warned:
                        logger.warning(f"theta clamped to 1 at k={state.k}")
                        clamp_warned = True
                momentum_bound = max(momentum_bound, float(np.linalg.norm(info.g)))
                if np.linalg.norm(new_state.m) > momentum_bound * (1.0 + 1e-12):
                    record.bound_violations += 1
                if prober is not None:
                    prober.observe(state.x, new_state.x, info.eta)
                state = new_state
                log_row(state)
                if record_trajectory:
                    record.trajectory.append(state.x.copy())
                    record.etas.append(info.eta)
                if prober is not None and cfg.probes_at(state.k):
                    record.probes.append(prober.probe(state.k, state.x, state.m))
                if self.throttle.is_allowed("progress"):
                    logger.debug(f"k={state.k}/{cfg.horizon} f={record.rows[-1][1]:.6g}")
        except DivergenceError as e:
            logger.error(f"Run diverged: {e}", exc_info=True)
            record.diverged = True
            record.message = str(e)

        record.x, record.m, record.k = state.x, state.m, state.k
        if record.bound_violations:
            logger.warning(f"momentum bound violated {record.bound_violations} times")
        logger.info(
            f"Run finished at k={state.k}: f={record.terminal_f:.6g}, diverged={record.diverged}"
        )
        return record


def run(problem: FiniteSumProblem, config: GsgdConfig, prober=None, record_trajectory: bool = False) -> RunRecord:
    return GsgdOptimizer(problem, config).run(prober=prober, record_trajectory=record_trajectory)


def step(problem: FiniteSumProblem, state: OptimizerState, config: GsgdConfig) -> OptimizerState:
    """Advance one iteration; the state's RNG stream is consumed in place."""
    return GsgdOptimizer(problem, config).step(state)
