"""Command-line interface.

Subcommands: `channels generate`, `run`, `evolve`, `report`.
Exit codes: 0 success, 2 configuration error, 3 numeric/convergence error,
4 provider or sandbox failure.
"""

import argparse
import json
import sys

from . import bench
from .channel import ArrayConfig, ScenarioConfig, generate_batch
from .eoh import EvolutionConfig, evolve
from .errors import (ConfigError, FasportError, NumericError, ProviderError,
                     SandboxError)
from .fchan import load_scenario_file, read_fchan, write_fchan
from .heuristics import GaConfig
from .providers import FixtureProvider, HttpProvider, MockProvider, native_response
from .sandbox import SandboxRunner

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PROVIDER = 4


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def _cmd_channels_generate(args) -> int:
    array, scenario, batch_size = load_scenario_file(args.config)
    if args.seed is not None:
        scenario = ScenarioConfig(**{**scenario.to_dict(), "master_seed": args.seed})
    batch = generate_batch(array, scenario, batch_size, threads=args.threads)
    write_fchan(batch, args.out)
    if args.verbose:
        print(f"wrote {batch.batch_size} realizations "
              f"({batch.num_ports} ports x {scenario.users_k} users) to {args.out}",
              file=sys.stderr)
    return EXIT_OK


def _cmd_run(args) -> int:
    spec = bench.ExperimentSpec.from_dict(_load_json(args.config))
    if args.seed is not None:
        spec = bench.ExperimentSpec(**{**spec.__dict__, "seed": args.seed})
    channels = read_fchan(args.channels) if args.channels else None
    table = bench.run_experiment(spec, channels=channels, threads=args.threads,
                                 timing=args.timing == "wall")
    bench.emit_csv(table, args.out)
    if args.verbose:
        print(f"wrote {len(table.rows)} result rows to {args.out}", file=sys.stderr)
    return EXIT_OK


def _build_provider(doc: dict, kind_override: str | None):
    cfg = doc.get("provider", {})
    if not isinstance(cfg, dict):
        raise ConfigError("provider section must be an object")
    kind = kind_override or cfg.get("kind")
    if kind is None:
        raise ConfigError("no provider configured (use --provider or the config file)")
    if kind == "mock":
        if "responses" in cfg:
            return MockProvider(cfg["responses"])
        schedule = cfg.get("schedule")
        if schedule:
            m = int(doc.get("population_m", 10))
            responses = [native_response(schedule.get("init", "random_selection"))] * m
            for native_id in schedule.get("generations", []):
                responses += [native_response(native_id)] * m
            return MockProvider(responses)
        return MockProvider([native_response("random_selection")])
    if kind == "fixture":
        if "path" not in cfg:
            raise ConfigError("fixture provider needs a 'path'")
        return FixtureProvider(cfg["path"])
    if kind == "http":
        for key in ("endpoint", "model"):
            if key not in cfg:
                raise ConfigError(f"http provider needs '{key}'")
        return HttpProvider(cfg["endpoint"], cfg["model"],
                            api_key=cfg.get("api_key"),
                            api_key_env=cfg.get("api_key_env"),
                            timeout_s=float(cfg.get("timeout_s", 120.0)))
    raise ConfigError(f"unknown provider kind {kind!r}")


def _cmd_evolve(args) -> int:
    doc = _load_json(args.config)
    if not isinstance(doc, dict):
        raise ConfigError("evolution config must be a JSON object")
    allowed = {"population_m", "generations_g", "eval_budget_f", "batch_b", "task",
               "seed", "ga", "grasp_starts", "provider", "sandbox", "channels",
               "array", "scenario", "provider_retries", "retry_backoff_s"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in evolution config: {sorted(unknown)}")
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    kwargs = {k: doc[k] for k in ("population_m", "generations_g", "eval_budget_f",
                                  "batch_b", "task", "grasp_starts",
                                  "provider_retries", "retry_backoff_s") if k in doc}
    if "ga" in doc:
        kwargs["ga"] = GaConfig(**doc["ga"])
    cfg = EvolutionConfig(seed=seed, **kwargs)

    if "channels" in doc:
        batch = read_fchan(doc["channels"])
        channel_path = doc["channels"]
    else:
        if "array" not in doc or "scenario" not in doc:
            raise ConfigError("evolution config needs 'channels' or array+scenario")
        array = ArrayConfig.from_dict(doc["array"])
        scenario = ScenarioConfig.from_dict(doc["scenario"])
        batch = generate_batch(array, scenario, cfg.batch_b, threads=args.threads)
        channel_path = None

    provider = _build_provider(doc, args.provider)
    sandbox = None
    sandbox_cfg = doc.get("sandbox")
    if sandbox_cfg:
        unknown = set(sandbox_cfg) - {"worker_cmd", "wall_timeout_s", "max_eval_calls"}
        if unknown:
            raise ConfigError(f"unknown keys in sandbox config: {sorted(unknown)}")
        if channel_path is None:
            raise ConfigError("sandboxed evolution needs a 'channels' file the worker "
                              "can read")
        sandbox = SandboxRunner(sandbox_cfg["worker_cmd"], channel_path, batch,
                                wall_timeout_s=float(sandbox_cfg.get("wall_timeout_s", 60.0)),
                                max_eval_calls=sandbox_cfg.get("max_eval_calls"))

    best, log = evolve(cfg, batch, provider, sandbox=sandbox)
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in log.evaluations:
            fh.write(json.dumps({
                "generation": rec.generation,
                "candidate_id": rec.candidate_id,
                "parent_ids": list(rec.parent_ids),
                "status": rec.status,
                "fitness": rec.fitness,
                "wall_time_s": rec.wall_time_s if args.timing == "wall" else 0.0,
            }) + "\n")
    if args.verbose and best is not None:
        print(f"best candidate {best.candidate_id} fitness={best.fitness}",
              file=sys.stderr)
    if log.partial:
        print("evolution aborted early: provider failed repeatedly", file=sys.stderr)
        return EXIT_PROVIDER
    return EXIT_OK


def _cmd_report(args) -> int:
    if args.kind == "convergence":
        fitnesses = []
        with open(args.in_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"invalid JSONL record: {exc}") from exc
                fitnesses.append(rec.get("fitness"))
        text = bench.convergence_report(fitnesses)
    else:
        with open(args.in_path, encoding="utf-8") as fh:
            table = bench.parse_csv(fh.read())
        widths = None
        lines = []
        header = ["algorithm", "sweep_value", "mean_gamma_db", "normalized",
                  "eval_count"]
        rows = [[r.algorithm, f"{r.sweep_value:g}", f"{r.mean_gamma_db:.3f}",
                 "-" if r.normalized is None else f"{r.normalized:.4f}",
                 str(r.eval_count)] for r in table.sorted_rows()]
        widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
                  for i, h in enumerate(header)]
        lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(header)))
        for row in rows:
            lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(header))))
        text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fasport",
        description="Fluid-antenna port selection benchmark and evolution CLI")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for realization-parallel stages")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument("--timing", choices=("none", "wall"), default="none",
                        help="record measured wall times (breaks byte-reproducibility)")
    sub = parser.add_subparsers(dest="command", required=True)

    channels = sub.add_parser("channels", help="channel file operations")
    channels_sub = channels.add_subparsers(dest="channels_command", required=True)
    gen = channels_sub.add_parser("generate", help="generate an fchan v1 file")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_channels_generate)

    run = sub.add_parser("run", help="run a benchmark experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--channels", default=None, help="use a pre-generated fchan file")
    run.add_argument("--out", required=True)
    run.set_defaults(func=_cmd_run)

    ev = sub.add_parser("evolve", help="run the heuristic-evolution engine")
    ev.add_argument("--config", required=True)
    ev.add_argument("--provider", choices=("mock", "fixture", "http"), default=None)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=_cmd_evolve)

    rep = sub.add_parser("report", help="summarize results or logs")
    rep.add_argument("--in", dest="in_path", required=True)
    rep.add_argument("--kind", choices=("table", "convergence"), required=True)
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProviderError, SandboxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, FasportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
