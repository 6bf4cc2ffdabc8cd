"""Command-line front end: simulate, fit, summarize, effects, compare.

Exit codes: 0 ok, 2 config/data, 3 IO, 4 numerical failure, 5 missing alpha draws.
"""
from __future__ import annotations

import argparse
import logging
import logging.config
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
import pydantic
import scipy
from dotenv import load_dotenv

from . import __version__
from .diagnostics import compare_summaries, default_batch_size, summarize, write_summary_json, write_trace_csv
from .errors import ConfigError, FileAccessError, QbldError
from .inference import average_success_probability, covariate_effect, information_criteria, loglik_from_store
from .models import DrawStore, ModelSpec, PanelDataset
from .panel import load_panel_csv, simulate_qbld, write_panel_csv
from .sampler import run_chain
from .schemas import RunConfig, load_config, load_effects
from .utils import canonical_hash, file_sha256, write_json

logger = logging.getLogger("qbld.main")

DEFAULT_LOGGING_INI = Path(__file__).resolve().parent.parent / "logging.ini"
DRAWS_FILE = "draws.csv"
SUMMARY_FILE = "summary.json"
METRICS_FILE = "metrics.json"
EFFECTS_FILE = "effects.json"
MANIFEST_FILE = "manifest.json"


def configure_logging() -> None:
    load_dotenv()
    ini = Path(os.getenv("QBLD_LOGGING_CONFIG", str(DEFAULT_LOGGING_INI)))
    if ini.is_file():
        logging.config.fileConfig(ini, disable_existing_loggers=False)
    else:
        logging.basicConfig(level=logging.INFO, format="%(levelname)-5.5s [%(name)s] %(message)s")
    level = os.getenv("QBLD_LOG_LEVEL")
    if level:
        logging.getLogger("qbld").setLevel(level.upper())


# ---------------- manifest

@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    algorithm: Optional[str] = None
    wall_seconds: float = 0.0
    outputs: Dict[str, dict] = field(default_factory=dict)
    extra: Dict[str, object] = field(default_factory=dict)

    def add_output(self, name: str, path: Path) -> None:
        self.outputs[name] = {"path": str(path), "sha256": file_sha256(path)}

    def write(self, path: Path) -> Path:
        payload = asdict(self)
        payload["config_hash"] = canonical_hash(self.config)
        payload["versions"] = {
            "qbld": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pandas": pd.__version__, "pydantic": pydantic.VERSION,
        }
        return write_json(path, payload)


def _spec(cfg: RunConfig, data: PanelDataset) -> ModelSpec:
    return ModelSpec(p=cfg.p, priors=cfg.prior.to_priors(data.k))


def _out_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FileAccessError(f"cannot create {path}: {exc}") from exc
    return path


# ---------------- commands

def cmd_simulate(config_path: Path, out_path: Path, seed: Optional[int] = None) -> int:
    tic = time.perf_counter()
    cfg = load_config(config_path, seed)
    sim = cfg.simulation
    data, truth = simulate_qbld(sim.n, sim.T, sim.beta, sim.alpha_variance, cfg.p, cfg.seed, l=sim.l)
    csv_path = write_panel_csv(data, out_path, id_col=cfg.id_column, time_col=cfg.time_column,
                               outcome=cfg.outcome_column)
    truth_path = write_json(out_path.with_suffix(".truth.json"), truth.to_json(data))

    manifest = RunManifest(command="simulate", config=cfg.model_dump(), seed=cfg.seed)
    manifest.add_output("panel", csv_path)
    manifest.add_output("truth", truth_path)
    manifest.wall_seconds = time.perf_counter() - tic
    manifest.write(out_path.with_suffix(".manifest.json"))
    return 0


def _fit_one(cfg: RunConfig, data: PanelDataset, out_dir: Path, algorithm: Optional[str] = None):
    spec = _spec(cfg, data)
    scfg = cfg.sampler_config(algorithm)
    tic = time.perf_counter()
    store = run_chain(data, spec, scfg)
    out_dir = _out_dir(out_dir)

    draws_path = write_trace_csv(store, out_dir / DRAWS_FILE)
    batch_size = cfg.batch_size or default_batch_size(store.G)
    summaries = summarize(store, batch_size)
    summary_path = write_summary_json(out_dir / SUMMARY_FILE, summaries)

    outputs = {"draws": draws_path, "summary": summary_path}
    extra: Dict[str, object] = {"batch_size": batch_size, "G": store.G, "n": data.n, "N_obs": data.n_obs,
                                "x_names": list(data.x_names), "s_names": list(data.s_names)}
    if store.has_alpha:
        loglik = loglik_from_store(store, data, spec, cfg.loglik_mode)
        metrics = information_criteria(loglik, data.k, data.n_obs).to_json()
        metrics["loglik_mode"] = cfg.loglik_mode
        outputs["metrics"] = write_json(out_dir / METRICS_FILE, metrics)
    else:
        logger.warning("alpha draws not stored; skipping %s", METRICS_FILE)

    manifest = RunManifest(command="fit", config=cfg.model_dump(), seed=cfg.seed,
                           algorithm=scfg.algorithm, extra=extra)
    for name, path in outputs.items():
        manifest.add_output(name, path)
    manifest.wall_seconds = time.perf_counter() - tic
    manifest.write(out_dir / MANIFEST_FILE)
    return store, summaries


def cmd_fit(config_path: Path, data_path: Path, out_dir: Path, seed: Optional[int] = None) -> int:
    cfg = load_config(config_path, seed)
    data = load_panel_csv(data_path, cfg.column_spec())
    _fit_one(cfg, data, out_dir)
    return 0


def cmd_summarize(config_path: Path, draws_dir: Path, data_path: Path, seed: Optional[int] = None) -> int:
    cfg = load_config(config_path, seed)
    data = load_panel_csv(data_path, cfg.column_spec())
    store = _read_draws(draws_dir, data)
    batch_size = cfg.batch_size or default_batch_size(store.G)
    path = write_summary_json(draws_dir / SUMMARY_FILE, summarize(store, batch_size))
    manifest = RunManifest(command="summarize", config=cfg.model_dump(), seed=cfg.seed,
                           extra={"batch_size": batch_size, "G": store.G})
    manifest.add_output("summary", path)
    manifest.write(draws_dir / "summarize.manifest.json")
    return 0


def _read_draws(draws_dir: Path, data: PanelDataset) -> DrawStore:
    path = draws_dir / DRAWS_FILE
    if not path.is_file():
        raise FileAccessError(f"no {DRAWS_FILE} in {draws_dir}")
    try:
        return DrawStore.read_csv(path, data.x_names, data.s_names,
                                  individual_ids=[b.id for b in data.individuals])
    except OSError as exc:
        raise FileAccessError(f"cannot read {path}: {exc}") from exc


def cmd_effects(config_path: Path, draws_dir: Path, data_path: Path, effects_path: Path,
                out_path: Optional[Path] = None, seed: Optional[int] = None) -> int:
    cfg = load_config(config_path, seed)
    data = load_panel_csv(data_path, cfg.column_spec())
    store = _read_draws(draws_dir, data)
    store.metadata["seed"] = cfg.seed
    if store.has_alpha and store.alpha.shape[1] != data.n:
        raise ConfigError(f"draws in {draws_dir} do not match the panel's {data.n} individuals")
    requests = load_effects(effects_path)
    spec = _spec(cfg, data)

    baseline = None
    if store.has_alpha or cfg.alpha_from_prior:
        baseline = average_success_probability(store, data, spec)
    report = {
        "p": cfg.p,
        "baseline_probability": baseline,
        "effects": [covariate_effect(store, data, req, spec, alpha_from_prior=cfg.alpha_from_prior).to_json()
                    for req in requests.effects],
    }
    path = write_json(out_path or draws_dir / EFFECTS_FILE, report)
    manifest = RunManifest(command="effects", config=cfg.model_dump(), seed=cfg.seed)
    manifest.add_output("effects", path)
    manifest.write(path.with_suffix(".manifest.json"))
    return 0


def cmd_compare(config_path: Path, data_path: Path, out_dir: Path, seed: Optional[int] = None) -> int:
    """Fit blocked and nonblocked samplers on one panel; write the side-by-side table."""
    cfg = load_config(config_path, seed)
    data = load_panel_csv(data_path, cfg.column_spec())
    _, blocked = _fit_one(cfg, data, out_dir / "blocked", "blocked")
    _, nonblocked = _fit_one(cfg, data, out_dir / "nonblocked", "nonblocked")
    table = compare_summaries(blocked, nonblocked)
    path = write_json(_out_dir(out_dir) / "comparison.json", table)
    manifest = RunManifest(command="compare", config=cfg.model_dump(), seed=cfg.seed)
    manifest.add_output("comparison", path)
    manifest.write(out_dir / MANIFEST_FILE)
    return 0


# ---------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="run configuration (JSON)")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--out", type=Path, default=None, help="output file or directory")

    parser = argparse.ArgumentParser(prog="qbld", description="Quantile regression for binary longitudinal data")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="simulate a QBLD panel")

    p_fit = sub.add_parser("fit", parents=[common], help="run the Gibbs sampler")
    p_fit.add_argument("--data", type=Path, required=True)

    p_sum = sub.add_parser("summarize", parents=[common], help="recompute diagnostics from a draws directory")
    p_sum.add_argument("--draws", type=Path, required=True)
    p_sum.add_argument("--data", type=Path, required=True)

    p_eff = sub.add_parser("effects", parents=[common], help="average covariate effects")
    p_eff.add_argument("--draws", type=Path, required=True)
    p_eff.add_argument("--data", type=Path, required=True)
    p_eff.add_argument("--effects", type=Path, required=True)

    p_cmp = sub.add_parser("compare", parents=[common], help="blocked vs nonblocked on one panel")
    p_cmp.add_argument("--data", type=Path, required=True)
    return parser


def run(args: argparse.Namespace) -> int:
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out or Path("panel.csv"), args.seed)
    if args.command == "fit":
        return cmd_fit(args.config, args.data, args.out or Path("fit"), args.seed)
    if args.command == "summarize":
        return cmd_summarize(args.config, args.draws, args.data, args.seed)
    if args.command == "effects":
        return cmd_effects(args.config, args.draws, args.data, args.effects, args.out, args.seed)
    return cmd_compare(args.config, args.data, args.out or Path("compare"), args.seed)


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except QbldError as exc:
        print(f"qbld {args.command}: {exc.message}", file=sys.stderr)
        logger.debug("failure", exc_info=True)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
