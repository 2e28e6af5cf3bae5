"""Configuration-driven experiment runner and the built-in figure presets."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .environments import LIGHT_FAMILIES, TraceSpec
from .errors import ConfigError, SoqoError
from .montecarlo import STATISTICS, MonteCarloEstimate, sample_many
from .policies import PolicySpec
from .spectral import SpectralMatrix, as_spectral

CSV_HEADER = ("experiment", "sweep", "policy", "mean", "stderr", "p95", "n", "seed")
SEED_ENV = "SOQO_SEED"
EIG_BASES = (0.3, 0.45, 0.5)
PRESET_DIM = 10
PRESET_RUNS = 1000
PRESET_HORIZON = 100
FIG2_AMPLITUDE = 5.0


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    name: str
    A: SpectralMatrix
    trace: TraceSpec
    policies: tuple[str, ...]
    statistic: str
    runs: int
    sweep_axis: str  # "T" or "p"
    sweep: tuple[float, ...]
    master_seed: int = 0
    out_dir: Path = Path(".")
    metadata: dict = field(default_factory=dict)

    def with_(self, **changes) -> "ExperimentConfig":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return ExperimentConfig(**kw)

    def trace_for(self, index: int, value) -> TraceSpec:
        seed = sweep_seed(self.master_seed, index)
        if self.sweep_axis == "T":
            return self.trace.with_(horizon=int(value), seed=seed)
        return self.trace.with_(adversarial_pct=float(value), seed=seed)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    sweep: float
    policy: str
    mean: float
    std_error: float
    p95: float
    n_runs: int
    seed: int

    def csv_fields(self) -> list[str]:
        sweep = int(self.sweep) if float(self.sweep).is_integer() else self.sweep
        return [self.experiment, str(sweep), self.policy, repr(self.mean), repr(self.std_error),
                repr(self.p95), str(self.n_runs), str(self.seed)]


def sweep_seed(master_seed: int, index: int) -> int:
    """Independent 63-bit seed for sweep position ``index``."""
    state = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=(int(index),)).generate_state(1, np.uint64)
    return int(state[0]) >> 1


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"not an integer: {raw!r}", SEED_ENV) from None


# --- parsing ----------------------------------------------------------------


def parse_matrix(value, field_name: str = "A") -> SpectralMatrix:
    """Accept ``{"eigvals": [...]}``, ``{"matrix": [[...]]}``, a flat list or a nested list."""
    try:
        if isinstance(value, dict):
            if "eigvals" in value:
                return as_spectral(np.asarray(value["eigvals"], dtype=float))
            if "matrix" in value:
                return as_spectral(np.asarray(value["matrix"], dtype=float))
            raise ConfigError("expected 'eigvals' or 'matrix'", field_name)
        return as_spectral(np.asarray(value, dtype=float))
    except ConfigError:
        raise
    except (SoqoError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc), field_name) from None


def _require(d: dict, key: str, prefix: str = ""):
    if key not in d:
        raise ConfigError("missing required field", prefix + key)
    return d[key]


def config_from_dict(d: dict, seed: int | None = None, runs: int | None = None,
                     out_dir=None) -> ExperimentConfig:
    """Validate a parsed config mapping; CLI overrides take precedence."""
    d = dict(d)
    name = str(_require(d, "name"))
    A = parse_matrix(_require(d, "A"))

    policies = _require(d, "policies")
    if not isinstance(policies, list) or not policies:
        raise ConfigError("must be a non-empty list", "policies")
    canon = []
    for k, p in enumerate(policies):
        try:
            canon.append(str(PolicySpec.parse(p)))
        except SoqoError as exc:
            raise ConfigError(str(exc), f"policies[{k}]") from None

    statistic = d.get("statistic", "total_cost")
    if statistic not in STATISTICS:
        raise ConfigError(f"must be one of {STATISTICS}", "statistic")

    n = runs if runs is not None else d.get("runs", PRESET_RUNS)
    if not isinstance(n, int) or n < 1:
        raise ConfigError("must be a positive integer", "runs")

    sweep = _require(d, "sweep")
    axes = [k for k in ("T", "p") if k in sweep]
    if len(axes) != 1 or set(sweep) - {"T", "p"}:
        raise ConfigError("exactly one of 'T' or 'p' is required", "sweep")
    axis = axes[0]
    values = sweep[axis]
    if not isinstance(values, list) or not values:
        raise ConfigError("must be a non-empty list", f"sweep.{axis}")
    if axis == "T" and any(not isinstance(t, int) or t < 1 for t in values):
        raise ConfigError("horizons must be positive integers", "sweep.T")
    if axis == "p" and any(not 0 <= p <= 100 for p in values):
        raise ConfigError("percentages must lie in [0, 100]", "sweep.p")

    trace = dict(_require(d, "trace"))
    trace.setdefault("dim", A.dim)
    if trace["dim"] != A.dim:
        raise ConfigError(f"dim {trace['dim']} does not match A ({A.dim})", "trace.dim")
    trace.setdefault("horizon", int(values[0]) if axis == "T" else PRESET_HORIZON)
    if axis == "p":
        trace.setdefault("mode", "mixed")
    try:
        spec = TraceSpec.from_dict(trace, A)
        # validate every sweep point up front, e.g. shift-mode divisibility
        for value in values:
            if axis == "T":
                spec.with_(horizon=int(value))
            else:
                spec.with_(adversarial_pct=float(value))
    except ConfigError:
        raise
    except (SoqoError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "trace") from None
    if axis == "p" and spec.mode != "mixed":
        raise ConfigError("a p sweep needs mode = 'mixed'", "trace.mode")

    master = seed if seed is not None else d.get("seed", default_seed())
    if not isinstance(master, int):
        raise ConfigError("must be an integer", "seed")
    out = Path(out_dir if out_dir is not None else d.get("out", "."))
    return ExperimentConfig(name, A, spec, tuple(canon), statistic, n, axis,
                            tuple(values), master, out, dict(d.get("metadata", {})))


def load_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            d = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(d, **overrides)


# --- presets ----------------------------------------------------------------


def _preset_dict(fig: str, env: str, base: float) -> dict:
    eigvals = [base**i for i in range(PRESET_DIM)]
    meta = {
        "eigvecs": "identity",
        "per_coordinate_variance": 1.0,
        "eigen_sequence": f"{base}^i, i=0..{PRESET_DIM - 1}",
    }
    d = {"name": f"{fig}-{env}-{base:g}", "A": {"eigvals": eigvals}, "runs": PRESET_RUNS, "metadata": meta}
    heavy = {"lognormal": "lognormal_sym", "pareto": "lomax_sym", "normal": "normal"}
    if fig == "fig1":
        d["policies"] = ["robd", "lai-gamma:1"]
        d["statistic"] = "regret_vs_lai"
        if env == "light":
            # shift mode needs five equal segments, so horizons step by 5
            d["trace"] = {"mode": "shift", "segments": [{"family": f} for f in LIGHT_FAMILIES]}
            d["sweep"] = {"T": list(range(5, PRESET_HORIZON + 1, 5))}
        else:
            d["trace"] = {"mode": "martingale", "increments": {"family": heavy[env]}}
            d["sweep"] = {"T": list(range(1, PRESET_HORIZON + 1))}
    else:
        d["policies"] = ["robd", "lai-gamma:1"]
        d["statistic"] = "ratio_vs_lai"
        d["trace"] = {
            "mode": "mixed",
            "horizon": PRESET_HORIZON,
            "increments": {"family": heavy[env]},
            "adversary": {"kind": "alternating_ray", "amplitude": FIG2_AMPLITUDE, "direction": "balanced"},
        }
        d["sweep"] = {"p": list(range(0, 101, 10))}
    return d


PRESETS = {
    f"{fig}-{env}-{base:g}": (fig, env, base)
    for fig, envs in (("fig1", ("light", "lognormal", "pareto")), ("fig2", ("normal", "lognormal", "pareto")))
    for env in envs
    for base in EIG_BASES
}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset_dict(name: str) -> dict:
    """Raw config mapping of a preset; ``fig2-normal`` style names default to base 0.3."""
    if name not in PRESETS and f"{name}-{EIG_BASES[0]:g}" in PRESETS:
        name = f"{name}-{EIG_BASES[0]:g}"
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; see list-presets", "preset")
    return _preset_dict(*PRESETS[name])


def preset(name: str, **overrides) -> ExperimentConfig:
    return config_from_dict(preset_dict(name), **overrides)


# --- running ----------------------------------------------------------------


def evaluate(config: ExperimentConfig, workers: int = 1) -> list[ResultRow]:
    """Compute one :class:`ResultRow` per (sweep value, policy) without writing files."""
    rows = []
    for k, value in enumerate(config.sweep):
        spec = config.trace_for(k, value)
        samples = sample_many(config.policies, config.A, spec, config.runs, config.statistic, workers)
        for policy, s in zip(config.policies, samples):
            est = MonteCarloEstimate.from_samples(s)
            if not all(math.isfinite(x) for x in (est.mean, est.std_error, est.p95)):
                raise SoqoError(f"non-finite estimate for {policy} at {config.sweep_axis}={value}")
            rows.append(ResultRow(config.name, value, policy, est.mean, est.std_error, est.p95, est.n_runs, spec.seed))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


def read_rows(path) -> list[ResultRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ConfigError(f"expected header {','.join(CSV_HEADER)}", str(path))
        return [ResultRow(r["experiment"], float(r["sweep"]), r["policy"], float(r["mean"]),
                          float(r["stderr"]), float(r["p95"]), int(r["n"]), int(r["seed"])) for r in reader]


def provenance(config: ExperimentConfig) -> dict:
    return {
        "name": config.name,
        "A": config.A.to_dict(),
        "eigvals": config.A.eigvals.tolist(),
        "trace": config.trace.to_dict(),
        "policies": list(config.policies),
        "statistic": config.statistic,
        "runs": config.runs,
        "sweep": {config.sweep_axis: list(config.sweep)},
        "master_seed": config.master_seed,
        "metadata": config.metadata,
    }


def run_experiment(config: ExperimentConfig, workers: int = 1, write: bool = True) -> list[ResultRow]:
    """Evaluate ``config`` and write ``<name>.csv``, ``<name>.svg`` and ``<name>.json`` to ``out_dir``."""
    from .plotting import emit_plot

    rows = evaluate(config, workers)
    if write:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{config.name}.csv").write_text(rows_to_csv(rows))
        (out / f"{config.name}.svg").write_text(emit_plot(rows))
        (out / f"{config.name}.json").write_text(json.dumps(provenance(config), indent=2, sort_keys=True) + "\n")
    return rows


__all__ = [
    "CSV_HEADER", "ExperimentConfig", "PRESETS", "ResultRow", "config_from_dict",
    "evaluate", "load_config", "preset", "preset_dict", "preset_names", "read_rows", "rows_to_csv",
    "run_experiment", "sweep_seed",
]
