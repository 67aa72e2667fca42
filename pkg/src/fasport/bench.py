"""Experiment runner: per-algorithm sweeps, normalized tables, CSV output.

Sweeps regenerate the channel batch per sweep value (derived seeds), run
every configured algorithm on every realization, and aggregate in the
linear power domain. Normalization against the exhaustive optimum (or the
basic GA) is applied per realization before averaging, i.e. a mean of
per-channel ratios.

wall_time_s columns are 0.0 unless timing is enabled: emitted artifacts
are byte-reproducible by default.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .balancing import Evaluator
from .channel import ArrayConfig, ChannelBatch, ScenarioConfig, generate_batch
from .errors import ConfigError, RefusalError
from .fchan import format_float
from .heuristics import (EXHAUSTIVE_CAP, GaConfig, GraspConfig, autoport,
                         exhaustive_search, random_selection, run_ga)

SWEEP_PARAMETERS = ("tx_power_dbm", "ports_per_axis", "aperture_w")
NORMALIZATIONS = ("none", "vs_exhaustive", "vs_basic_ga")
ALGORITHM_NAMES = ("exhaustive", "random", "ga", "autoport")

CSV_HEADER = ("algorithm,sweep_param,sweep_value,mean_gamma_db,mean_gamma_linear,"
              "normalized,std,eval_count,wall_time_s")


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    label: str
    config: dict

    @classmethod
    def from_dict(cls, d: dict) -> "AlgorithmSpec":
        if not isinstance(d, dict):
            raise ConfigError("algorithm entry must be an object")
        unknown = set(d) - {"name", "label", "config"}
        if unknown:
            raise ConfigError(f"unknown keys in algorithm entry: {sorted(unknown)}")
        name = d.get("name")
        if name not in ALGORITHM_NAMES:
            raise ConfigError(f"algorithm name must be one of {ALGORITHM_NAMES}")
        return cls(name=name, label=d.get("label", name), config=dict(d.get("config", {})))


@dataclass(frozen=True)
class ExperimentSpec:
    algorithms: tuple
    realizations: int
    normalization: str = "none"
    seed: int = 0
    array: ArrayConfig | None = None
    scenario: ScenarioConfig | None = None
    sweep_parameter: str | None = None
    sweep_values: tuple = ()

    def __post_init__(self):
        if not self.algorithms:
            raise ConfigError("experiment needs at least one algorithm")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")
        if self.sweep_parameter is not None and self.sweep_parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ConfigError("algorithm labels must be unique")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        allowed = {"algorithms", "realizations", "normalization", "seed", "array",
                   "scenario", "sweep"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown keys in experiment config: {sorted(unknown)}")
        if "algorithms" not in d:
            raise ConfigError("experiment config missing 'algorithms'")
        algorithms = tuple(AlgorithmSpec.from_dict(a) for a in d["algorithms"])
        sweep = d.get("sweep")
        sweep_parameter = None
        sweep_values = ()
        if sweep is not None:
            unknown = set(sweep) - {"parameter", "values"}
            if unknown:
                raise ConfigError(f"unknown keys in sweep: {sorted(unknown)}")
            sweep_parameter = sweep.get("parameter")
            sweep_values = tuple(sweep.get("values", ()))
            if not sweep_values:
                raise ConfigError("sweep needs at least one value")
        return cls(
            algorithms=algorithms,
            realizations=int(d.get("realizations", 20)),
            normalization=d.get("normalization", "none"),
            seed=int(d.get("seed", 0)),
            array=ArrayConfig.from_dict(d["array"]) if "array" in d else None,
            scenario=ScenarioConfig.from_dict(d["scenario"]) if "scenario" in d else None,
            sweep_parameter=sweep_parameter,
            sweep_values=sweep_values,
        )


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    sweep_param: str
    sweep_value: float
    mean_gamma_db: float
    mean_gamma_linear: float
    normalized: float | None
    std: float
    eval_count: int
    wall_time_s: float


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r.algorithm, r.sweep_value))


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


def _apply_sweep(spec: ExperimentSpec, value):
    array, scen = spec.array, spec.scenario
    if spec.sweep_parameter == "tx_power_dbm":
        scen = ScenarioConfig(**{**scen.to_dict(), "tx_power_dbm": float(value)})
    elif spec.sweep_parameter == "ports_per_axis":
        array = ArrayConfig(**{**array.to_dict(), "n_x": int(value), "n_y": int(value)})
    elif spec.sweep_parameter == "aperture_w":
        array = ArrayConfig(**{**array.to_dict(), "w_x": float(value), "w_y": float(value)})
    return array, scen


def _sweep_value_of(batch: ChannelBatch, parameter: str) -> float:
    if parameter == "ports_per_axis":
        return float(batch.array.n_x)
    if parameter == "aperture_w":
        return float(batch.array.w_x)
    return float(batch.scenario.tx_power_dbm)


def _check_exhaustive_cap(num_ports: int, n: int):
    count = comb(num_ports, n)
    if count > EXHAUSTIVE_CAP:
        raise RefusalError(
            f"normalization vs_exhaustive needs C({num_ports}, {n}) = {count} "
            f"evaluations per realization, above the cap of {EXHAUSTIVE_CAP}")


def _run_algorithm(alg: AlgorithmSpec, evaluator: Evaluator, realization: int,
                   seed: int) -> float:
    n = evaluator.selected_n
    if alg.name == "exhaustive":
        _, gamma = exhaustive_search(evaluator, realization, n)
        return gamma
    if alg.name == "random":
        sel = random_selection(n, evaluator.num_ports, np.random.default_rng(seed))
        return evaluator.evaluate_selection(realization, sel)
    if alg.name == "autoport":
        cfg = GraspConfig(num_candidates_c=int(alg.config.get("num_candidates_c", 5)),
                          seed=seed)
        _, gamma = autoport(evaluator, realization, cfg)
        return gamma
    if alg.name == "ga":
        allowed = {"population_m", "elite_fraction_p", "iterations_i",
                   "crossover_kind", "mutation_kind", "seed"}
        unknown = set(alg.config) - allowed
        if unknown:
            raise ConfigError(f"unknown GA config keys: {sorted(unknown)}")
        cfg = GaConfig(**{**alg.config, "seed": seed})
        _, gamma, _ = run_ga(evaluator, realization, cfg)
        return gamma
    raise ConfigError(f"unknown algorithm {alg.name!r}")


def _reference_gammas(spec: ExperimentSpec, batch: ChannelBatch, realizations: int,
                      sweep_index: int, threads: int) -> np.ndarray | None:
    if spec.normalization == "none":
        return None
    evaluator = Evaluator(batch)
    n = batch.scenario.selected_n
    if spec.normalization == "vs_exhaustive":
        _check_exhaustive_cap(batch.num_ports, n)

        def ref(r):
            return exhaustive_search(evaluator, r, n)[1]
    else:  # vs_basic_ga, paper-default basic GA
        def ref(r):
            cfg = GaConfig(seed=_derived_seed(spec.seed, sweep_index, r, 0xBA51C))
            return run_ga(evaluator, r, cfg)[1]

    return np.array(_map_realizations(ref, realizations, threads))


def _map_realizations(fn, realizations: int, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(realizations)))
    return [fn(r) for r in range(realizations)]


def _validate_before_compute(spec: ExperimentSpec, channels: ChannelBatch | None):
    if spec.normalization != "vs_exhaustive":
        return
    if channels is not None:
        _check_exhaustive_cap(channels.num_ports, channels.scenario.selected_n)
        return
    for value in spec.sweep_values:
        array, scen = _apply_sweep(spec, value)
        _check_exhaustive_cap(array.total_ports, scen.selected_n)


def run_experiment(spec: ExperimentSpec, channels: ChannelBatch | None = None,
                   threads: int = 1, timing: bool = False) -> ResultTable:
    """Run every algorithm over every sweep value; aggregate a ResultTable."""
    if channels is None:
        if spec.array is None or spec.scenario is None or spec.sweep_parameter is None:
            raise ConfigError("experiment without a channel file needs array, scenario "
                              "and sweep sections")
        points = list(spec.sweep_values)
    else:
        points = [None]
    _validate_before_compute(spec, channels)
    table = ResultTable()
    sweep_param = spec.sweep_parameter or "tx_power_dbm"
    for vi, value in enumerate(points):
        if channels is None:
            array, scen = _apply_sweep(spec, value)
            scen = ScenarioConfig(**{**scen.to_dict(),
                                     "master_seed": _derived_seed(spec.seed, vi)})
            batch = generate_batch(array, scen, spec.realizations)
        else:
            batch = channels
            value = _sweep_value_of(batch, sweep_param)
        realizations = min(spec.realizations, batch.batch_size)
        refs = _reference_gammas(spec, batch, realizations, vi, threads)
        for ai, alg in enumerate(spec.algorithms):
            evaluator = Evaluator(batch)
            base_seed = int(alg.config.get("seed", spec.seed))

            def score(r, _alg=alg, _ev=evaluator, _base=base_seed, _vi=vi, _ai=ai):
                return _run_algorithm(_alg, _ev, r, _derived_seed(_base, _vi, r, _ai))

            start = time.perf_counter()
            gammas = np.array(_map_realizations(score, realizations, threads))
            elapsed = time.perf_counter() - start if timing else 0.0
            mean_linear = float(np.mean(gammas))
            normalized = None
            if refs is not None:
                ratios = gammas / refs
                normalized = float(np.mean(ratios))
                if spec.normalization == "vs_exhaustive" and normalized > 1.0 + 1e-9:
                    raise RefusalError(
                        f"normalized value {normalized} above 1: exhaustive reference "
                        f"is not optimal, which indicates a solver defect")
            table.rows.append(ResultRow(
                algorithm=alg.label,
                sweep_param=sweep_param,
                sweep_value=float(value),
                mean_gamma_db=float(10.0 * np.log10(mean_linear)) if mean_linear > 0
                else float("-inf"),
                mean_gamma_linear=mean_linear,
                normalized=normalized,
                std=float(np.std(gammas)),
                eval_count=evaluator.eval_count,
                wall_time_s=elapsed,
            ))
    return table


def table_to_csv(table: ResultTable) -> str:
    if not table.rows:
        raise ConfigError("refusing to emit an empty result table")
    lines = [CSV_HEADER]
    for row in table.sorted_rows():
        normalized = "" if row.normalized is None else format_float(row.normalized)
        lines.append(",".join([
            row.algorithm,
            row.sweep_param,
            format_float(row.sweep_value),
            format_float(row.mean_gamma_db),
            format_float(row.mean_gamma_linear),
            normalized,
            format_float(row.std),
            str(row.eval_count),
            format_float(row.wall_time_s),
        ]))
    return "\n".join(lines) + "\n"


def emit_csv(table: ResultTable, path) -> None:
    text = table_to_csv(table)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def parse_csv(text: str) -> ResultTable:
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError("unrecognized results CSV header")
    table = ResultTable()
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 9:
            raise ConfigError(f"malformed CSV row: {ln}")
        table.rows.append(ResultRow(
            algorithm=parts[0], sweep_param=parts[1], sweep_value=float(parts[2]),
            mean_gamma_db=float(parts[3]), mean_gamma_linear=float(parts[4]),
            normalized=None if parts[5] == "" else float(parts[5]),
            std=float(parts[6]), eval_count=int(parts[7]), wall_time_s=float(parts[8])))
    return table


def convergence_curve(fitnesses) -> list:
    """Best-so-far curve: one (evals, best) point per fitness evaluation."""
    curve = []
    best = None
    for i, f in enumerate(fitnesses, start=1):
        if f is not None and np.isfinite(f) and (best is None or f > best):
            best = f
        if best is not None:
            curve.append((i, best))
    return curve


def convergence_report(fitnesses) -> str:
    """CSV of the monotone best-so-far fitness against evaluation count."""
    curve = convergence_curve(fitnesses)
    if not curve:
        raise ConfigError("no successful evaluations in the log")
    lines = ["evals,best_fitness"]
    lines += [f"{i},{format_float(v)}" for i, v in curve]
    return "\n".join(lines) + "\n"
