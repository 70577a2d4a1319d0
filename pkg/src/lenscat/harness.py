"""Command-line experiments: ``lenscat <scatter|sojourn|compare|check|pullback>``.

Exit codes: 0 success or equivalent, 1 inequivalent or a failed certificate,
2 configuration error, 3 invalid metric, 4 trapped ray under ``--strict``,
5 support violation of a pulled-back metric.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from ._parallel import default_workers
from .cuspmap import CuspSampling, lens_equivalent
from .errors import NonPositiveDefinite, SpecError, SupportViolation
from .flow import STEP_FAILURE, TRAPPED
from .metric import (AdmissibilityGrid, TabulatedMetric, admissibility_report, eval_metric,
                     load_diffeo, load_function, load_metric, pullback, save_tabulated,
                     support_deviation)
from .sampling import random_inward_entries
from .scattering import BoundarySampling, check_non_trapping, lens_sweep, sojourn_limit_table

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_METRIC, EXIT_TRAPPED, EXIT_SUPPORT = range(6)
COMMANDS = ("scatter", "sojourn", "compare", "check", "pullback")


class ConfigError(Exception):
    pass


class MetricInvalid(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    metric: str | None = None
    metric2: str | None = None
    diffeo: str | None = None
    f: str | None = None
    rays: int | None = None
    seed: int = 0
    tol: float = 1e-5
    smax: float | None = None
    lmax: float | None = None
    workers: int | None = None
    out: str | None = None
    format: str = "csv"
    strict: bool = False
    grid_step: float | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        for name in ("tol", "smax", "lmax", "grid_step"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be positive")
        if self.rays is not None and self.rays < 1:
            raise ConfigError("rays must be at least 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.metric is None:
            raise ConfigError("--metric is required")
        if self.command == "compare" and (self.metric2 is None) == (self.diffeo is None):
            raise ConfigError("compare needs exactly one of --metric2 and --diffeo")
        if self.command == "pullback" and self.diffeo is None:
            raise ConfigError("pullback needs --diffeo")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def digest(self) -> str:
        """Hash of everything that can change results (not workers or output path)."""
        data = self.to_dict()
        data.pop("workers")
        data.pop("out")
        for key in ("metric", "metric2", "diffeo", "f"):
            if data[key] is not None:
                data[key] = _file_digest(data[key])
        text = json.dumps(data, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @property
    def n_workers(self) -> int:
        return self.workers if self.workers is not None else default_workers()


def _file_digest(path):
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    except OSError:
        return path


# ---------------------------------------------------------------------------
# loading and validation


def _load_metric(path):
    try:
        return load_metric(path)
    except SpecError as exc:
        raise ConfigError(str(exc)) from exc
    except (SupportViolation, NonPositiveDefinite, ValueError) as exc:
        raise MetricInvalid(str(exc)) from exc


def validate_metric(field):
    """Positive definiteness on a coarse grid and flatness outside the support."""
    t, z = AdmissibilityGrid(n_time=5, n_space=11).points(field.dim, field.R, field.T)
    try:
        eval_metric(field, t, z)
    except NonPositiveDefinite as exc:
        raise MetricInvalid(str(exc)) from exc
    dev = support_deviation(field)
    if dev > 1e-12:
        raise MetricInvalid(f"metric is not Euclidean outside its support (deviation {dev:.3g})")


def _metric(path):
    field = _load_metric(path)
    validate_metric(field)
    return field


def _header(config, columns):
    return f"lenscat {__version__} config={config.digest()} columns={','.join(columns)}"


def _emit(config, text):
    if config.out:
        with open(config.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def _dumps(obj):
    return json.dumps(obj, indent=2, default=_json_default, allow_nan=True) + "\n"


def _table_text(config, columns, rows):
    if config.format == "json":
        return _dumps({"columns": columns, "config": config.digest(), "version": __version__,
                       "rows": [[float(x) for x in r] for r in rows]})
    buf = io.StringIO()
    buf.write(f"# {_header(config, columns)}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join("%.17g" % x for x in r) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def _entries(config, field, default_rays=100):
    rng = np.random.default_rng(config.seed)
    count = config.rays or default_rays
    return random_inward_entries(rng, count, field.dim, field.R, field.T)


def _sweep_summary(table, field, lmax):
    bad = (table.status == TRAPPED) | (table.status == STEP_FAILURE)
    ok = ~bad
    offending = [{"index": int(k), "t": float(table.t[k]), "z": table.z_in[k].tolist(),
                  "v": table.v_in[k].tolist(), "status": int(table.status[k]),
                  "length": float(table.length[k])} for k in np.flatnonzero(bad)[:20]]
    return {
        "rays": len(table),
        "max_length": float(np.max(table.length[ok])) if ok.any() else None,
        "trapped": int(np.sum(table.status == TRAPPED)),
        "step_failures": int(np.sum(table.status == STEP_FAILURE)),
        "L_max": 50.0 * field.R if lmax is None else lmax,
        "offending": offending,
    }


def _mask_failed(table, rows):
    bad = (table.status == TRAPPED) | (table.status == STEP_FAILURE)
    rows = rows.copy()
    n = table.z_in.shape[1]
    # keep t and the entry; exit data of rays that never left are meaningless
    rows[bad, 1 + 2 * n:] = np.nan
    return rows


def _finish_sweep(config, summary):
    sys.stderr.write(json.dumps(summary, default=_json_default) + "\n")
    if config.strict and (summary["trapped"] or summary["step_failures"]):
        return EXIT_TRAPPED
    return EXIT_OK


def run_scatter(config: ExperimentConfig) -> int:
    field = _metric(config.metric)
    t, z, v = _entries(config, field)
    table = lens_sweep(field, t, z, v, workers=config.n_workers, max_length=config.lmax)
    _emit(config, _table_text(config, table.columns(), _mask_failed(table, table.rows())))
    return _finish_sweep(config, _sweep_summary(table, field, config.lmax))


def run_sojourn(config: ExperimentConfig) -> int:
    field = _metric(config.metric)
    t, z, v = _entries(config, field)
    table = lens_sweep(field, t, z, v, workers=config.n_workers, max_length=config.lmax)
    s_max = config.smax or 1e4 * field.R
    if s_max < 10 * field.R:
        raise ConfigError("--smax must be at least 10 R")
    value, decay, extrapolated = sojourn_limit_table(table, s_max)
    n = field.dim
    columns = (["t"] + [f"z_in_{i + 1}" for i in range(n)] + [f"v_in_{i + 1}" for i in range(n)]
               + ["length", "sojourn_closed", "sojourn_limit", "decay_estimate", "extrapolated"])
    rows = np.column_stack([table.t, table.z_in, table.v_in, table.length, table.sojourn,
                            value, decay, extrapolated])
    bad = (table.status == TRAPPED) | (table.status == STEP_FAILURE)
    rows[bad, 1 + 2 * n:] = np.nan
    _emit(config, _table_text(config, columns, rows))
    return _finish_sweep(config, _sweep_summary(table, field, config.lmax))


def _compare_sampling(config):
    if config.rays is None:
        return CuspSampling(seed=config.seed)
    return CuspSampling(directions=config.rays, xi=1, eta=1, mode="random", seed=config.seed)


def run_compare(config: ExperimentConfig) -> int:
    g1 = _metric(config.metric)
    if config.metric2 is not None:
        g2 = _metric(config.metric2)
    else:
        psi = _load_diffeo(config.diffeo)
        try:
            g2 = pullback(g1, psi)
        except SupportViolation as exc:
            raise MetricInvalid(str(exc)) from exc
    if (g1.dim, g1.R, g1.T) != (g2.dim, g2.R, g2.T):
        raise ConfigError("metrics must share dim, R and T")
    report, tab1, tab2 = lens_equivalent(g1, g2, _compare_sampling(config), config.tol,
                                         workers=config.n_workers, max_length=config.lmax,
                                         graphs=True)
    data = report.to_dict()
    data["config"] = config.digest()
    data["version"] = __version__
    if config.format == "csv" and config.out:
        stem, ext = os.path.splitext(config.out)
        for tab, path in ((tab1, config.out), (tab2, f"{stem}.2{ext or '.csv'}")):
            with open(path, "w", newline="") as fh:
                tab.to_csv(fh, _header(config, tab.columns()))
        sys.stdout.write(_dumps(data))
    else:
        _emit(config, _dumps(data))
    return EXIT_OK if report.equivalent else EXIT_FAIL


def run_check(config: ExperimentConfig) -> int:
    field = _metric(config.metric)
    f = None
    if config.f is not None:
        try:
            f = load_function(config.f)
        except SpecError as exc:
            raise ConfigError(str(exc)) from exc
        if f.dim != field.dim:
            raise ConfigError("function and metric dimensions differ")
    adm = admissibility_report(field, f)
    if config.rays is None:
        samples = BoundarySampling()
    else:
        samples = BoundarySampling(points=config.rays, directions=1, times=1, mode="random",
                                   seed=config.seed)
    trap = check_non_trapping(field, samples, config.lmax, workers=config.n_workers)
    data = {"admissibility": adm.to_dict(), "non_trapping": trap.to_dict(),
            "passed": bool(adm.admissible and trap.certificate),
            "config": config.digest(), "version": __version__}
    _emit(config, _dumps(data))
    return EXIT_OK if data["passed"] else EXIT_FAIL


def _load_diffeo(path):
    try:
        return load_diffeo(path)
    except SpecError as exc:
        raise ConfigError(str(exc)) from exc


class _Support(Exception):
    pass


def run_pullback(config: ExperimentConfig) -> int:
    field = _metric(config.metric)
    try:
        psi = _load_diffeo(config.diffeo)
        if hasattr(psi, "check_support"):
            psi.check_support()
        pulled = pullback(field, psi)
    except SupportViolation as exc:
        raise _Support(str(exc)) from exc
    if psi.dim != field.dim:
        raise ConfigError("diffeo and metric dimensions differ")
    step = config.grid_step or 0.01 * field.R
    # the time cutoff is steeper than the spatial profiles, so t gets twice the resolution
    tab = TabulatedMetric.from_field(pulled, step, time_step=0.5 * step)
    out = config.out or "pullback.json"
    save_tabulated(tab, out)
    summary = {"out": out, "grid_step": step, "time_step": 0.5 * step, "nodes": int(tab.values[..., 0].size),
               "family": pulled.describe(), "config": config.digest(), "version": __version__}
    sys.stdout.write(_dumps(summary))
    return EXIT_OK


RUNNERS = {"scatter": run_scatter, "sojourn": run_sojourn, "compare": run_compare,
           "check": run_check, "pullback": run_pullback}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lenscat", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with default settings; flags override it")
    p.add_argument("--metric")
    p.add_argument("--metric2")
    p.add_argument("--diffeo")
    p.add_argument("--f", help="convex function spec for check (default |z|^2)")
    p.add_argument("--rays", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--smax", type=float)
    p.add_argument("--lmax", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--strict", action="store_true", default=None)
    p.add_argument("--grid-step", dest="grid_step", type=float)
    return p


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = ExperimentConfig.from_json(fh.read()).to_dict()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from exc
    data["command"] = args.command
    for name in ("metric", "metric2", "diffeo", "f", "rays", "seed", "tol", "smax", "lmax",
                 "workers", "out", "format", "strict", "grid_step"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        return RUNNERS[config.command](config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except MetricInvalid as exc:
        return _fail(EXIT_METRIC, "metric", exc)
    except _Support as exc:
        return _fail(EXIT_SUPPORT, "support", exc)


def _fail(code, kind, exc):
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
