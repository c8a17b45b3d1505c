"""RunRecord persistence: run.csv, probes.csv, config.echo, sweep.csv and trajectory CSVs."""
import csv
import json
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from config import Config
from utils.logger import get_logger


logger = get_logger(__name__)

RUN_COLUMNS = ("k", "f", "m_norm", "eta", "theta")
PROBE_COLUMNS = ("k", "stationarity", "lyapunov", "momentum_gap", "delta", "delta_stationarity")
SWEEP_COLUMNS = ("seed", "c", "terminal_f", "terminal_stationarity", "diverged", "iterations")


def format_value(value, precision: Optional[int] = None) -> str:
    """Render one CSV cell: ints and bools as integers, floats with ``precision`` significant digits, None empty."""
    precision = Config.CSV_PRECISION if precision is None else precision
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.{precision}g}"


def _write_rows(path: Path, columns: Sequence[str], rows: Iterable[Sequence], precision: Optional[int]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v, precision) for v in row])


def echo_config(config: Dict) -> str:
    """Canonical JSON of the effective config (sorted keys, fixed indentation)."""
    return json.dumps(config, sort_keys=True, indent=2) + "\n"


def write_run(record, out_dir, config: Optional[Dict] = None, precision: Optional[int] = None) -> Dict[str, Path]:
    """
    Persist a RunRecord into ``out_dir``.

    Args:
        record: RunRecord from the optimizer
        out_dir: target directory, created when missing
        config: config document echoed to config.echo (defaults to record.config)
        precision: significant digits for floats

    Returns:
        Mapping of artifact name to written path
    """
    out = Path(out_dir)
    paths = {
        "run": out / "run.csv",
        "probes": out / "probes.csv",
        "echo": out / "config.echo",
    }
    _write_rows(paths["run"], RUN_COLUMNS, record.rows, precision)
    _write_rows(
        paths["probes"],
        PROBE_COLUMNS,
        ((p.k, p.stationarity, p.lyapunov, p.momentum_gap, p.delta, p.delta_stationarity) for p in record.probes),
        precision,
    )
    with open(paths["echo"], "w", newline="", encoding="utf-8") as f:
        f.write(echo_config(record.config if config is None else config))
    logger.info(f"Wrote {len(record.rows)} rows and {len(record.probes)} probes to {out}")
    return paths


def read_csv(path) -> List[Dict[str, float]]:
    """Read a CSV written by this module; empty cells come back as None."""
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for raw in csv.DictReader(f):
            rows.append({key: (float(value) if value != "" else None) for key, value in raw.items()})
    return rows


def write_sweep(rows: Sequence[Dict], path, precision: Optional[int] = None) -> Path:
    """Write the sweep summary, one row per (seed, c), sorted by (seed, c)."""
    path = Path(path)
    ordered = sorted(rows, key=lambda r: (r["seed"], r["c"]))
    _write_rows(path, SWEEP_COLUMNS, ([r[c] for c in SWEEP_COLUMNS] for r in ordered), precision)
    logger.info(f"Wrote sweep summary with {len(ordered)} rows to {path}")
    return path


def write_trajectory(trajectory: Sequence[np.ndarray], etas: Sequence[float], path, precision: Optional[int] = None) -> Path:
    """Write k, eta_k and the coordinates of x_k; the last row has no step and an empty eta."""
    path = Path(path)
    n = len(trajectory[0]) if trajectory else 0
    columns = ["k", "eta"] + [f"x{i}" for i in range(n)]
    rows = (
        [k, etas[k] if k < len(etas) else None] + [float(v) for v in x]
        for k, x in enumerate(trajectory)
    )
    _write_rows(path, columns, rows, precision)
    return path
