"""Command-line pipeline: ``wismc ingest|fit|simulate|stats|calibrate``.

Every subcommand reads the same run configuration (YAML or JSON, via
``--config``) with flag overrides on top.  Output files carry a commented
metadata header with the configuration hash; nothing time-dependent is
written, so identical inputs and configuration give byte-identical files.

Exit codes: 0 success, 1 computational error, 2 input or configuration
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from datetime import timedelta
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import __version__
from .bundle import config_hash, load_metadata, load_model, save_model
from .calibration import DEFAULT_GRID, CalibrationConfig, calibrate_lambda
from .discretization import VOLUME_EDGES, volume_state_space
from .errors import ComputationError, InputError, WismcError
from .ingestion import FormatSpec, log_volume_change, parse_ticks, read_volume_series, resample, write_volume_series
from .kernel import fit_model
from .simulation import SimulationConfig, read_simulation, simulate, write_simulation
from .stats import acf_abs, acf_rmse_percent, fpt_distribution, write_acf, write_histogram, write_survival

logger = logging.getLogger("wismc")

EXIT_OK, EXIT_COMPUTE, EXIT_INPUT = 0, 1, 2


class ConfigError(InputError):
    pass


def _parse_edge(value) -> float:
    if isinstance(value, str):
        text = value.strip().lower().lstrip("+").replace(".inf", "inf")
        if text in ("inf", "infinity"):
            return math.inf
        if text in ("-inf", "-infinity"):
            return -math.inf
    return float(value)


@dataclass
class RunConfig:
    inputs: list[str] = field(default_factory=list)
    output_dir: str = "wismc-out"
    delimiter: str = ","
    timestamp_column: str | int = "timestamp"
    price_column: str | int = "price"
    volume_column: str | int = "volume"
    has_header: bool = True
    timestamp_format: str | None = None
    bar_seconds: int = 60
    state_edges: list[float] = field(default_factory=lambda: list(VOLUME_EDGES))
    index_bins: int = 5
    lam: float | None = None
    lambda_grid: list[float] | None = None
    max_sojourn: int | None = None
    initial_index: float = 0.0
    seed: int = 0
    horizon: int | None = None
    replications: int = 1
    burn_in: int = 0
    max_lag: int = 100
    sigmas: list[float] = field(default_factory=lambda: [2.0, 10.0, 1000.0])
    model: list[str] = field(default_factory=list)
    synthetic: list[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            self.state_edges = [_parse_edge(e) for e in self.state_edges]
            volume_state_space(self.state_edges)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"state_edges: {exc}") from exc
        for name in ("inputs", "model", "synthetic"):
            value = getattr(self, name)
            setattr(self, name, [value] if isinstance(value, str) else list(value))
        checks = [
            (self.index_bins >= 1, "index_bins must be >= 1"),
            (self.lam is None or 0.0 < self.lam <= 1.0, "lam must lie in (0, 1]"),
            (self.lambda_grid is None or (len(self.lambda_grid) > 0
                                          and all(0.0 < v <= 1.0 for v in self.lambda_grid)),
             "lambda_grid must be a non-empty list of values in (0, 1]"),
            (self.horizon is None or self.horizon >= 1, "horizon must be >= 1"),
            (self.replications >= 1, "replications must be >= 1"),
            (self.burn_in >= 0, "burn_in must be >= 0"),
            (self.max_lag >= 1, "max_lag must be >= 1"),
            (all(s > 1.0 for s in self.sigmas), "every sigma must exceed 1"),
            (self.bar_seconds > 0, "bar_seconds must be positive"),
            (self.max_sojourn is None or self.max_sojourn >= 1, "max_sojourn must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["state_edges"] = [str(e) if math.isinf(e) else e for e in self.state_edges]
        return data

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    def space(self):
        return volume_state_space(self.state_edges)

    def format_spec(self) -> FormatSpec:
        return FormatSpec(self.timestamp_column, self.price_column, self.volume_column, self.delimiter,
                          self.has_header, self.timestamp_format)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data: dict = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{p}: configuration must be a mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def symbol_of(path: str | Path) -> str:
    return Path(path).name.split(".")[0]


def _expand_inputs(paths: Sequence[str]) -> list[Path]:
    out = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix == ".csv"))
        elif p.exists():
            out.append(p)
        else:
            raise InputError(f"input not found: {p}")
    if not out:
        raise ConfigError("no input files given")
    return out


def _metadata(cfg: RunConfig, **extra) -> dict:
    meta = {"generator": f"wismc {__version__}", "config_hash": cfg.hash}
    meta.update(extra)
    meta["config"] = json.dumps(cfg.to_dict(), sort_keys=True)
    return meta


def read_header(path: str | Path) -> dict:
    meta = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = value
    return meta


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(cfg: RunConfig) -> list[Path]:
    out = _out_dir(cfg)
    written = []
    for path in _expand_inputs(cfg.inputs):
        symbol = symbol_of(path)
        try:
            with open(path, "rb") as handle:
                ticks, report = parse_ticks(handle, cfg.format_spec())
            series = resample(ticks, timedelta(seconds=cfg.bar_seconds), symbol=symbol)
        except InputError as exc:
            raise InputError(f"{path}: {exc}") from exc
        target = out / f"{symbol}.bars.csv"
        write_volume_series(series, target, _metadata(cfg, symbol=symbol, source=path.name,
                                                      zero_bars_merged=series.zero_bars_merged))
        print(f"{symbol}: {report.rows} ticks ({report.malformed} malformed) -> {len(series)} bars, "
              f"{series.zero_bars_merged} zero-volume bars merged")
        written.append(target)
    return written


def _log_changes(path: Path):
    return log_volume_change(read_volume_series(path, symbol=symbol_of(path)))


def _write_calibration(result, path: Path, meta: dict) -> None:
    header = "".join(f"# {k}: {v}\n" for k, v in meta.items())
    rows = "".join(f"{lam!r},{obj!r}\n" for lam, obj in zip(result.lambda_grid, result.objective_values))
    path.write_text(header + "lambda,acf_rmse_percent\n" + rows, encoding="utf-8")


def _calibrate(cfg: RunConfig, values, symbol: str, out: Path):
    grid = cfg.lambda_grid or list(DEFAULT_GRID)
    result = calibrate_lambda(values, grid, CalibrationConfig(seed=cfg.seed, space=cfg.space(),
                                                              bin_count=cfg.index_bins, max_lag=cfg.max_lag,
                                                              max_sojourn=cfg.max_sojourn))
    print(f"{symbol}: lambda calibration")
    for lam, obj in zip(result.lambda_grid, result.objective_values):
        print(f"  lambda={lam:<6g} acf_rmse={obj:.4f}%")
    print(f"  best lambda = {result.best_lambda:g}")
    _write_calibration(result, out / f"{symbol}.calibration.csv", _metadata(cfg, symbol=symbol))
    return result


def cmd_calibrate(cfg: RunConfig) -> list[Path]:
    out = _out_dir(cfg)
    written = []
    for path in _expand_inputs(cfg.inputs):
        symbol = symbol_of(path)
        _calibrate(cfg, _log_changes(path).values, symbol, out)
        written.append(out / f"{symbol}.calibration.csv")
    return written


def cmd_fit(cfg: RunConfig) -> list[Path]:
    out = _out_dir(cfg)
    written = []
    for path in _expand_inputs(cfg.inputs):
        symbol = symbol_of(path)
        series = _log_changes(path)
        lam = cfg.lam
        if lam is None:
            lam = _calibrate(cfg, series.values, symbol, out).best_lambda
        model = fit_model(series, lam, space=cfg.space(), bin_count=cfg.index_bins,
                          max_sojourn=cfg.max_sojourn, initial_index=cfg.initial_index)
        target = out / f"{symbol}.model.json"
        save_model(model, target, _metadata(cfg, symbol=symbol, source=path.name))
        empty = model.support_report
        print(f"{symbol}: {model.fit_info['n_bars']} changes, {model.fit_info['n_jumps']} jumps, "
              f"lambda={lam:g}, max_sojourn={model.max_sojourn}, {len(empty)} empty cells")
        for i, x in empty:
            print(f"  no support: state {model.state_space.labels[i]} / index {model.index_binning.labels[x]}")
        written.append(target)
    return written


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    out = _out_dir(cfg)
    written = []
    models = cfg.model or cfg.inputs
    if not models:
        raise ConfigError("simulate needs a model bundle (--model)")
    for path in _expand_inputs(models):
        model = load_model(path)
        symbol = load_metadata(path).get("symbol", symbol_of(path))
        horizon = cfg.horizon or int(model.fit_info.get("n_bars", 0))
        if horizon < 1:
            raise ConfigError(f"{path}: no horizon given and the bundle records no fit length")
        sim_cfg = SimulationConfig(seed=cfg.seed, horizon=horizon, replication_count=cfg.replications,
                                   burn_in=cfg.burn_in)
        space = model.state_space
        for r in range(cfg.replications):
            run = simulate(model, sim_cfg, replication=r)
            target = out / f"{symbol}.synthetic.r{r}.csv"
            meta = _metadata(cfg, symbol=symbol, model=path.name, seed=cfg.seed, replication=r,
                             rng="PCG64(SeedSequence(seed, spawn_key=(replication,)))", horizon=horizon,
                             lam=repr(model.lam), state_edges=json.dumps([str(e) for e in space.edges]),
                             state_labels=json.dumps(list(space.labels)), fallbacks=len(run.fallback_log))
            write_simulation(run, target, meta)
            print(f"{symbol}: replication {r}: {horizon} bars, {len(run.trajectory) - 1} jumps, "
                  f"{sum(f.uses for f in run.fallback_log)} fallback draws")
            written.append(target)
    return written


def _load_series(path: Path, cfg: RunConfig) -> tuple[str, np.ndarray, dict]:
    meta = read_header(path)
    with open(path, encoding="utf-8") as handle:
        header = next(line for line in handle if not line.startswith("#")).strip()
    if header.startswith("t,state,value"):
        edges = meta.get("state_edges")
        if edges is not None and [float(e) for e in json.loads(edges)] != list(cfg.state_edges):
            raise ConfigError(f"{path}: produced under state edges {edges}, which differ from "
                              f"the configured {cfg.state_edges}; refusing to compare")
        _, values = read_simulation(path)
        return "synthetic", values, meta
    return "real", _log_changes(path).values, meta


def _stats_for(name: str, values: np.ndarray, cfg: RunConfig, out: Path, report: dict):
    acf = acf_abs(values, cfg.max_lag)
    meta = _metadata(cfg, series=name, max_lag=cfg.max_lag, normalization=acf.normalization)
    write_acf(acf, out / f"{name}.acf.csv", meta)
    entry = {"n": int(len(values)), "acf_lag0": acf.lag0, "fpt": {}}
    for sigma in cfg.sigmas:
        fpt = fpt_distribution(values, sigma)
        meta = _metadata(cfg, series=name, sigma=sigma, start_rule=fpt.start_rule, censored=fpt.censored_count)
        write_survival(fpt, out / f"{name}.fpt.sigma{sigma:g}.csv", meta)
        write_histogram(fpt, out / f"{name}.fpt.sigma{sigma:g}.hist.csv", meta)
        done = fpt.uncensored_times
        entry["fpt"][f"{sigma:g}"] = {
            "starts": int(len(fpt.passage_times)),
            "censored": fpt.censored_count,
            "median": float(np.median(done)) if done.size else None,
        }
    report["series"][name] = entry
    return acf


def cmd_stats(cfg: RunConfig) -> list[Path]:
    out = _out_dir(cfg)
    real_paths = _expand_inputs(cfg.inputs) if cfg.inputs else []
    synth_paths = _expand_inputs(cfg.synthetic) if cfg.synthetic else []
    if not real_paths and not synth_paths:
        raise ConfigError("stats needs at least one series")
    report = {"config": cfg.to_dict(), "config_hash": cfg.hash, "series": {}, "comparisons": {}}
    loaded = [(p, *_load_series(p, cfg)) for p in real_paths + synth_paths]

    real = {}
    synthetic: dict[str, list] = {}
    for path, kind, values, meta in loaded:
        name = path.name.removesuffix(".csv")
        acf = _stats_for(name, values, cfg, out, report)
        report["series"][name]["kind"] = kind
        report["series"][name]["source"] = path.name
        symbol = meta.get("symbol", symbol_of(path))
        if path in real_paths:
            real[symbol] = (name, acf)
        else:
            synthetic.setdefault(symbol, []).append((name, acf))

    rows = []
    for symbol, (name, real_acf) in sorted(real.items()):
        pairs = synthetic.get(symbol, [])
        if not pairs:
            print(f"{symbol}: no synthetic series to compare with; comparison skipped")
            continue
        errors = [acf_rmse_percent(real_acf, s_acf) for _, s_acf in pairs]
        report["comparisons"][symbol] = {"real": name, "synthetic": [n for n, _ in pairs],
                                         "acf_rmse_percent": errors, "mean": float(np.mean(errors))}
        rows.append((symbol, float(np.mean(errors))))
        print(f"{symbol}: ACF RMSE {np.mean(errors):.2f}%")
    if real and not synthetic:
        print("only real series given; comparison skipped")

    written = [out / "stats_report.json"]
    (out / "stats_report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    if rows:
        width = max(5, *(len(s) for s, _ in rows))
        table = [f"{'Stock':<{width}} | Error", f"{'-' * width}-+-------"]
        table += [f"{s:<{width}} | {e:.1f}%" for s, e in rows]
        text = "\n".join(table) + "\n"
        header = "".join(f"# {k}: {v}\n" for k, v in _metadata(cfg).items())
        (out / "rmse_table.txt").write_text(header + text, encoding="utf-8")
        print(text, end="")
        written.append(out / "rmse_table.txt")
    return written


COMMANDS = {"ingest": cmd_ingest, "fit": cmd_fit, "simulate": cmd_simulate, "stats": cmd_stats,
            "calibrate": cmd_calibrate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wismc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wismc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("inputs", nargs="*", default=None, help="input files or directories")
        p.add_argument("--config", help="YAML or JSON run configuration")
        p.add_argument("--out", dest="output_dir")
        p.add_argument("--seed", type=int)
        p.add_argument("--lam", type=float)
        p.add_argument("--lambda-grid", dest="lambda_grid", type=float, nargs="+")
        p.add_argument("--index-bins", dest="index_bins", type=int)
        p.add_argument("--max-sojourn", dest="max_sojourn", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--replications", type=int)
        p.add_argument("--burn-in", dest="burn_in", type=int)
        p.add_argument("--max-lag", dest="max_lag", type=int)
        p.add_argument("--sigma", dest="sigmas", type=float, action="append")
        p.add_argument("--model", action="append")
        p.add_argument("--synthetic", action="append")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    if not overrides.get("inputs"):
        overrides.pop("inputs", None)
    try:
        cfg = load_config(args.config, overrides)
        COMMANDS[args.command](cfg)
    except (InputError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TypeError as exc:
        print(f"error: bad configuration: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ComputationError, WismcError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
