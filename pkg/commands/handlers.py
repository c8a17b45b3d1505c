"""Command handlers behind the gsgd CLI: run, counterexample, validate, sweep."""
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, TextIO

import numpy as np

from config import Config
from config.experiment import ExperimentConfig
from core.errors import ConfigError, InvalidInputError, InvalidParameterError
from core.problems import make_counterexample
from core.schedules import StepsizeSchedule, validate
from services.diagnostics import ProbeTracker, stationarity_measure
from services.optimizer import GsgdConfig, GsgdOptimizer, RunRecord
from services.recorder import write_run, write_sweep, write_trajectory
from utils.logger import get_logger


logger = get_logger(__name__)

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_DIVERGED = 2

# Kink of g(u, v) = |2u + v| + |u + 10| that signSGD never reaches from the diagonal.
COUNTEREXAMPLE_STATIONARY_POINT = np.array([-10.0, 20.0])
COUNTEREXAMPLE_MAX_STEP = 1.0 / 3.0


def execute(experiment: ExperimentConfig, seed: Optional[int] = None, c: Optional[float] = None) -> RunRecord:
    """Build the problem, attach a probe tracker and run one configured experiment."""
    problem = experiment.problem.build()
    config = experiment.gsgd_config(seed=seed, c=c)
    logger.info(f"Running {config.method} (seed={config.seed}, c={config.schedule.c}) on {problem.describe()}")
    tracker = ProbeTracker(
        problem,
        config.phi,
        config.schedule,
        stationarity_radius=experiment.output.stationarity_radius,
        gap_method=experiment.output.momentum_gap_method,
    )
    return GsgdOptimizer(problem, config).run(prober=tracker, record_trajectory=experiment.output.trajectory)


def summarize(record: RunRecord, seed: int, c: float) -> Dict:
    return {
        "seed": seed,
        "c": c,
        "terminal_f": record.terminal_f,
        "terminal_stationarity": record.terminal_stationarity,
        "diverged": record.diverged,
        "iterations": record.k,
    }


def _sweep_job(config_data: Dict, seed: int, c: float) -> Dict:
    experiment = ExperimentConfig.from_dict(config_data)
    return summarize(execute(experiment, seed=seed, c=c), seed, c)


class ExperimentCommands:
    """Owns the CLI commands; every handler returns a process exit code."""

    def __init__(self, out: Optional[TextIO] = None, err: Optional[TextIO] = None):
        """
        Initialize the handlers.

        Args:
            out: stream for reports (stdout by default)
            err: stream for one-line error messages (stderr by default)
        """
        self.out = out or sys.stdout
        self.err = err or sys.stderr
        logger.info("ExperimentCommands initialized")

    def _say(self, line: str) -> None:
        print(line, file=self.out)

    def _fail(self, message: str, code: int = EXIT_BAD_INPUT) -> int:
        print(f"error: {message}", file=self.err)
        return code

    def _output_dir(self, experiment: ExperimentConfig) -> Path:
        return Path(Config.OUTPUT_DIR or experiment.output.directory)

    def _load(self, config_path) -> ExperimentConfig:
        return ExperimentConfig.from_file(config_path)

    def cmd_run(self, config_path) -> int:
        """
        Run one experiment and write run.csv, probes.csv and config.echo.

        Returns:
            0 on completion, 1 on a malformed config, 2 on divergence
        """
        try:
            experiment = self._load(config_path)
            out_dir = self._output_dir(experiment)
            record = execute(experiment)
            write_run(record, out_dir, experiment.to_dict(), experiment.output.precision)
            if record.trajectory is not None:
                write_trajectory(record.trajectory, record.etas, out_dir / "trajectory.csv", experiment.output.precision)
        except ConfigError as e:
            logger.error(f"Bad config {config_path}: {e}")
            return self._fail(str(e))
        except (InvalidParameterError, InvalidInputError) as e:
            logger.error(f"Invalid experiment {config_path}: {e}", exc_info=True)
            return self._fail(str(e))

        summary = summarize(record, experiment.method.seed, experiment.schedule.c)
        self._say(
            f"k={summary['iterations']} f={summary['terminal_f']:.6g} "
            f"stationarity={summary['terminal_stationarity']:.6g} diverged={summary['diverged']}"
        )
        if record.diverged:
            return self._fail(record.message, EXIT_DIVERGED)
        return EXIT_OK

    def cmd_counterexample(self, eps0: float, eta0: float, K: int, out_dir=None) -> int:
        """
        signSGD on |2u + v| + |u + 10| from (eps0, eps0) with side=plus kinks and the diagonal tie.

        The momentum stepsize is fixed at 1, so every step moves along sign(g).
        Reports max |u - v|, max |u|, the terminal stationarity and the distance
        to the true stationary point (-10, 20).
        """
        if not 0.0 < eps0 < 1.0 / 3.0:
            return self._fail(f"eps0 must lie in (0, 1/3), got {eps0}")
        if not 0.0 < eta0 <= COUNTEREXAMPLE_MAX_STEP:
            return self._fail(f"eta0 must lie in (0, 1/3], got {eta0}")
        if K < 0:
            return self._fail(f"K must be >= 0, got {K}")

        problem = make_counterexample(side="plus")
        config = GsgdConfig(
            method="signsgd",
            schedule=StepsizeSchedule(
                regime="fixed", eta_rule="power", eta0=eta0, p=0.5, theta0=1.0, eta_cap=COUNTEREXAMPLE_MAX_STEP
            ),
            tie="diagonal",
            seed=0,
            horizon=K,
            probe_period=max(K, 1),
            x0=(eps0, eps0),
        )
        record = GsgdOptimizer(problem, config).run(record_trajectory=True)
        xs = np.asarray(record.trajectory)
        report = {
            "max_abs_u_minus_v": float(np.max(np.abs(xs[:, 0] - xs[:, 1]))),
            "max_abs_u": float(np.max(np.abs(xs[:, 0]))),
            "terminal_stationarity": stationarity_measure(problem, record.x),
            "distance_to_stationary_point": float(np.linalg.norm(record.x - COUNTEREXAMPLE_STATIONARY_POINT)),
        }
        for name, value in report.items():
            self._say(f"{name} = {value:.17g}")

        target = out_dir or Config.OUTPUT_DIR
        if target is not None:
            write_trajectory(record.trajectory, record.etas, Path(target) / "counterexample.csv")
        if record.diverged:
            return self._fail(record.message, EXIT_DIVERGED)
        return EXIT_OK

    def cmd_validate(self, config_path) -> int:
        """Print the per-assumption lines for the config's schedule; 0 when nothing fails."""
        try:
            experiment = self._load(config_path)
        except ConfigError as e:
            logger.error(f"Bad config {config_path}: {e}")
            return self._fail(str(e))
        report = validate(experiment.schedule, max(100, experiment.method.horizon))
        for line in report.lines():
            self._say(line)
        return EXIT_OK if report.passed else EXIT_BAD_INPUT

    def cmd_sweep(self, config_path) -> int:
        """
        Run every (seed, c) pair of the sweep block on a bounded process pool and write sweep.csv.

        Diverged runs become flagged rows; the command still exits 0.
        """
        try:
            experiment = self._load(config_path)
        except ConfigError as e:
            logger.error(f"Bad config {config_path}: {e}")
            return self._fail(str(e))
        if experiment.sweep is None:
            return self._fail("config has no sweep block")

        jobs = [(seed, c) for seed in experiment.sweep.seeds for c in experiment.sweep.scalings]
        data = experiment.to_dict()
        rows: List[Dict] = []
        try:
            if Config.MAX_WORKERS == 1 or len(jobs) == 1:
                rows = [_sweep_job(data, seed, c) for seed, c in jobs]
            else:
                with ProcessPoolExecutor(max_workers=min(Config.MAX_WORKERS, len(jobs))) as pool:
                    futures = [pool.submit(_sweep_job, data, seed, c) for seed, c in jobs]
                    rows = [f.result() for f in futures]
        except (InvalidParameterError, InvalidInputError) as e:
            logger.error(f"Sweep aborted: {e}", exc_info=True)
            return self._fail(str(e))

        path = write_sweep(rows, self._output_dir(experiment) / "sweep.csv", experiment.output.precision)
        diverged = sum(1 for r in rows if r["diverged"])
        finite = [r["terminal_f"] for r in rows if not math.isnan(r["terminal_f"])]
        self._say(f"{len(rows)} runs, {diverged} diverged, best f={min(finite):.6g}" if finite else f"{len(rows)} runs")
        self._say(f"wrote {path}")
        return EXIT_OK
