"""ExperimentConfig: the single JSON document that drives run, validate and sweep."""
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from config.settings import Config
from core.errors import ConfigError, InvalidInputError, InvalidParameterError
from core.problems import (
    LOSSES,
    SIDES,
    FiniteSumProblem,
    make_counterexample,
    make_l1_regression,
    make_planted_l1_regression,
    make_relu_net,
    synthetic_data,
)
from core.schedules import StepsizeSchedule
from services.optimizer import GsgdConfig
from utils.logger import get_logger


logger = get_logger(__name__)

PROBLEM_KINDS = ("counterexample", "l1-regression", "relu-net")
GAP_METHODS = ("axis", "cover")


def _line_of(source: Optional[str], key: str) -> Optional[int]:
    """1-based line of the first occurrence of ``"key"`` in the JSON source."""
    if not source:
        return None
    needle = f'"{key}"'
    for lineno, text in enumerate(source.splitlines(), start=1):
        if needle in text:
            return lineno
    return None


def _block(cls, data: Any, block: str, source: Optional[str]):
    """Build dataclass ``cls`` from a JSON object, rejecting unknown keys."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"block {block!r} must be an object", _line_of(source, block))
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in block {block!r}", _line_of(source, key))
    try:
        return cls(**data)
    except (TypeError, InvalidParameterError, InvalidInputError) as e:
        raise ConfigError(f"invalid {block} block: {e}", _line_of(source, block)) from e


@dataclass
class SyntheticConfig:
    """Planted-model data recipe; labels are A x_planted plus uniform noise."""

    N: int = 20
    n: int = 5
    noise: float = 0.0
    data_seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.N, int) and isinstance(self.n, int) and self.N >= 1 and self.n >= 1):
            raise InvalidParameterError(f"N and n must be positive integers, got N={self.N}, n={self.n}")
        if self.noise < 0.0:
            raise InvalidParameterError(f"noise must be >= 0, got {self.noise}")


@dataclass
class ProblemConfig:
    """
    Problem block.

    Attributes:
        kind: counterexample, l1-regression or relu-net
        side: kink side limit of the piecewise-linear selections
        A, b: inline data (l1-regression, relu-net); a synthetic recipe is used when absent
        synthetic: planted data recipe
        widths: [n_in, n_hidden, 1] for relu-net
        loss: l1 or half-square (relu-net)
        c_relu: value selected for ReLU'(0)
    """

    kind: str = "l1-regression"
    side: str = "plus"
    A: Optional[List[List[float]]] = None
    b: Optional[List[float]] = None
    synthetic: Optional[SyntheticConfig] = None
    widths: Optional[List[int]] = None
    loss: str = "l1"
    c_relu: float = 0.0

    def __post_init__(self):
        if isinstance(self.synthetic, dict):
            self.synthetic = SyntheticConfig(**self.synthetic)
        if self.kind not in PROBLEM_KINDS:
            raise InvalidParameterError(f"kind must be one of {PROBLEM_KINDS}, got {self.kind!r}")
        if self.side not in SIDES:
            raise InvalidParameterError(f"side must be one of {SIDES}, got {self.side!r}")
        if self.loss not in LOSSES:
            raise InvalidParameterError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if (self.A is None) != (self.b is None):
            raise InvalidParameterError("A and b must be given together")
        if self.kind == "relu-net" and (self.widths is None or len(self.widths) != 3):
            raise InvalidParameterError("relu-net needs widths [n_in, n_hidden, 1]")

    def build(self) -> FiniteSumProblem:
        """Instantiate the problem; synthetic data is drawn from its own data seed."""
        if self.kind == "counterexample":
            return make_counterexample(self.side)
        recipe = self.synthetic or SyntheticConfig()
        if self.kind == "l1-regression":
            if self.A is not None:
                return make_l1_regression(self.A, self.b, side=self.side)
            return make_planted_l1_regression(recipe.N, recipe.n, recipe.noise, recipe.data_seed, side=self.side)
        if self.A is not None:
            data_a, data_b = self.A, self.b
        else:
            data_a, data_b, _ = synthetic_data(recipe.N, self.widths[0], recipe.noise, recipe.data_seed)
        return make_relu_net(self.widths, data_a, data_b, loss=self.loss, c_relu=self.c_relu)


@dataclass
class MethodConfig:
    """Method block: the GsgdConfig fields that are not schedule or output settings."""

    method: str = "heavy-ball"
    alpha: float = 0.0
    C: Optional[float] = None
    tie: str = "zero"
    lion_tau: str = "theta"
    lion_tau0: float = 0.1
    lion_tau_p: float = 0.5
    noise: str = "none"
    noise_level: float = 0.0
    seed: int = 0
    horizon: int = 1000
    batch: str = "sample"
    x0: Optional[List[float]] = None
    x0_scale: float = 1.0

    def __post_init__(self):
        if not isinstance(self.horizon, int) or isinstance(self.horizon, bool):
            raise InvalidParameterError(f"horizon must be an integer, got {self.horizon!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise InvalidParameterError(f"seed must be an integer, got {self.seed!r}")


@dataclass
class OutputConfig:
    """
    Output block.

    stationarity_radius is the radius of the stationarity column: 0 for
    dist(0, conv D_f(x_k)), a fixed non-negative radius, or "delta" for the
    momentum-gap radius. The delta-radius value is always written to its own
    delta_stationarity column. log_probes adds probes at k = d * 10^e.
    """

    directory: str = "out"
    probe_period: int = Config.PROBE_PERIOD
    precision: int = Config.CSV_PRECISION
    stationarity_radius: Union[str, float] = 0.0
    momentum_gap_method: str = "axis"
    trajectory: bool = False
    log_probes: bool = False

    def __post_init__(self):
        if not isinstance(self.probe_period, int) or self.probe_period < 1:
            raise InvalidParameterError(f"probe_period must be a positive integer, got {self.probe_period!r}")
        if not isinstance(self.precision, int) or not 1 <= self.precision <= 17:
            raise InvalidParameterError(f"precision must be an integer in [1, 17], got {self.precision!r}")
        radius = self.stationarity_radius
        if radius != "delta" and not (isinstance(radius, (int, float)) and radius >= 0):
            raise InvalidParameterError(f"stationarity_radius must be 'delta' or >= 0, got {radius!r}")
        if self.momentum_gap_method not in GAP_METHODS:
            raise InvalidParameterError(f"momentum_gap_method must be one of {GAP_METHODS}")
        if not isinstance(self.log_probes, bool):
            raise InvalidParameterError(f"log_probes must be true or false, got {self.log_probes!r}")


@dataclass
class SweepConfig:
    seeds: List[int] = field(default_factory=lambda: [0])
    scalings: List[float] = field(default_factory=lambda: [1.0])

    def __post_init__(self):
        if not self.seeds or not self.scalings:
            raise InvalidParameterError("sweep needs at least one seed and one scaling")
        if any(not c > 0.0 for c in self.scalings):
            raise InvalidParameterError("sweep scalings must be positive")


@dataclass
class ExperimentConfig:
    """Problem, method, schedule, output and optional sweep blocks."""

    problem: ProblemConfig = field(default_factory=ProblemConfig)
    method: MethodConfig = field(default_factory=MethodConfig)
    schedule: StepsizeSchedule = field(default_factory=StepsizeSchedule)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: Optional[SweepConfig] = None

    @classmethod
    def from_dict(cls, data: Dict, source: Optional[str] = None) -> "ExperimentConfig":
        """
        Build from a parsed document.

        Args:
            data: parsed JSON object
            source: original text, used to locate offending keys

        Raises:
            ConfigError: unknown keys or invalid values, with the line when it can be found
        """
        if not isinstance(data, dict):
            raise ConfigError("top level must be a JSON object", 1)
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown top-level key {key!r}", _line_of(source, key))
        problem_data = data.get("problem")
        if isinstance(problem_data, dict) and isinstance(problem_data.get("synthetic"), dict):
            problem_data = dict(problem_data)
            problem_data["synthetic"] = _block(SyntheticConfig, problem_data["synthetic"], "synthetic", source)
        config = cls(
            problem=_block(ProblemConfig, problem_data, "problem", source),
            method=_block(MethodConfig, data.get("method"), "method", source),
            schedule=_block(StepsizeSchedule, data.get("schedule"), "schedule", source),
            output=_block(OutputConfig, data.get("output"), "output", source),
            sweep=_block(SweepConfig, data["sweep"], "sweep", source) if data.get("sweep") is not None else None,
        )
        try:
            config.gsgd_config()
        except InvalidParameterError as e:
            raise ConfigError(f"invalid method block: {e}", _line_of(source, "method")) from e
        return config

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON: {e.msg}", e.lineno) from e
        return cls.from_dict(data, source=text)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """
        Load an experiment config from disk.

        Raises:
            ConfigError: unreadable file or invalid document
        """
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e}") from e
        config = cls.from_json(text)
        logger.info(f"Loaded experiment config from {path}")
        return config

    def to_dict(self) -> Dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def gsgd_config(self, seed: Optional[int] = None, c: Optional[float] = None) -> GsgdConfig:
        """GsgdConfig for one run, optionally overriding the seed and the schedule scaling."""
        m = self.method
        schedule = self.schedule if c is None else replace(self.schedule, c=c)
        return GsgdConfig(
            method=m.method,
            schedule=schedule,
            alpha=m.alpha,
            C=m.C,
            tie=m.tie,
            lion_tau=m.lion_tau,
            lion_tau0=m.lion_tau0,
            lion_tau_p=m.lion_tau_p,
            noise=m.noise,
            noise_level=m.noise_level,
            seed=m.seed if seed is None else seed,
            horizon=m.horizon,
            probe_period=self.output.probe_period,
            log_probes=self.output.log_probes,
            batch=m.batch,
            x0=tuple(m.x0) if m.x0 is not None else None,
            x0_scale=m.x0_scale,
        )
