"""Evolution of heuristics: LLM-guided search over port-selection algorithms.

A population of candidate heuristics (idea text + code payload) is evolved
by rank-based parent selection, prompt-mediated reproduction through a
provider, fitness evaluation on a channel batch (mean balanced SINR), and
survival-of-the-fittest management. Candidates whose payload names a
built-in heuristic run natively, so the whole loop is testable without a
guest runtime or a live provider.
"""

import re
import time
from dataclasses import dataclass, field

import numpy as np

from .balancing import Evaluator
from .channel import ChannelBatch
from .errors import ConfigError, ParseError, ProviderError
from .heuristics import (GaConfig, GraspConfig, autoport, crossover_basic,
                         crossover_frequency, exhaustive_search, mutation_basic,
                         mutation_swap_noise, run_ga)
from .portable_rng import SplitMix64
from .providers import call_with_retries

TASKS = ("crossover_op", "mutation_op", "full_port_selector")

SYSTEM_PROMPT = "You are an expert in designing heuristic optimization algorithms."

CROSSOVER_TEMPLATE = '''
def crossover(parents,  M):
    """
    Design a crossover function to be used in the genetic algorithm.
    Args:
     parents: 2D integer Numpy array of shape (n_parents, n).
     M: Number of output populations.
    Returns:
    offspring: 2D integer Numpy array of shape (M, n).
    """
'''

CROSSOVER_TASK = ("Design a crossover function for a genetic algorithm. The function "
                  "performs a genetic crossover function on parents to generate multiple "
                  "offspring.")

MUTATION_TEMPLATE = '''
def mutation(population, N):
    """
    Design a mutation function to be used in the genetic algorithm.
    Args:
        population: Numpy array of shape (p, n).
        N: The largest integer for the population is N-1.
    Returns:
        mutated_population: Numpy array of shape (p, n).
    """
'''

MUTATION_TASK = ("Design a mutation function for a genetic algorithm.  The function "
                 "modifies a given 2D population array parents to ensure exploration of "
                 "the genetic algorithm.")

SELECTOR_TEMPLATE = '''
def select_ports(K,n,N,Pt,B,H,noise_power):
    """
   Select n out of N ports to maximize the average objective value of B communications channels.

    Args:
        K: The number of users.
        n: The number of ports to be selected.
        N: Total number of ports available.
        Pt: Total transmit power available.
        b: Total number of channel realizations.
        H: Numpy array of shape (B,N,K). It denotes B channel realizations.
        noise_power: Noise power.
    Returns:
        port_sample: Numpy array of shape (B, n). For each row of it, all values should be integers from 0 to N-1 and cannot be repeated.

    For the n-th channel realization H(n), suppose port is a valid port selection solution, and then the effective channel becomes h_n = H[n,port,:]. The objective value will be calculated using the pre-defined function f_n=sinr_balancing(n, K, h_n, Pt, noise_power).
    """
'''

SELECTOR_TASK = ("Implement a function that selects a subset of ports for each channel "
                 "realization to maximize the average SINR of B communications channels.")

TASK_TEMPLATES = {
    "crossover_op": (CROSSOVER_TASK, CROSSOVER_TEMPLATE, "def crossover(parents,  M)"),
    "mutation_op": (MUTATION_TASK, MUTATION_TEMPLATE, "def mutation(population, N)"),
    "full_port_selector": (SELECTOR_TASK, SELECTOR_TEMPLATE,
                           "def select_ports(K,n,N,Pt,B,H,noise_power)"),
}

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_NATIVE_RE = re.compile(r"^native:\s*([A-Za-z0-9_]+)$")


@dataclass
class HeuristicCandidate:
    """An evolvable algorithm: idea text plus a guest-source or native payload."""

    idea_text: str
    guest_source: str | None = None
    native_id: str | None = None
    fitness: float | None = None
    parent_ids: tuple = ()
    generation: int = 0
    candidate_id: str = ""

    def __post_init__(self):
        has_guest = bool(self.guest_source)
        has_native = bool(self.native_id)
        if has_guest == has_native:
            raise ConfigError("payload must be exactly one of guest_source / native_id")

    @property
    def payload_text(self) -> str:
        return self.guest_source if self.guest_source else f"native: {self.native_id}"


@dataclass(frozen=True)
class EvolutionConfig:
    population_m: int = 10
    generations_g: int = 30
    eval_budget_f: int = 300
    batch_b: int = 50
    task: str = "full_port_selector"
    seed: int = 0
    ga: GaConfig = field(default_factory=lambda: GaConfig(population_m=8,
                                                          elite_fraction_p=0.25,
                                                          iterations_i=10))
    grasp_starts: int = 5
    provider_retries: int = 3
    retry_backoff_s: float = 1.0

    def __post_init__(self):
        if self.population_m < 2:
            raise ConfigError("population_m must be >= 2")
        if self.generations_g < 0:
            raise ConfigError("generations_g must be >= 0")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        if self.eval_budget_f < self.population_m:
            raise ConfigError("eval_budget_f must cover the initial population")


@dataclass
class FitnessReport:
    mean_min_sinr: float
    per_instance: list
    wall_time_s: float
    status: str  # ok | runtime_error | timeout | invalid_output
    detail: str = ""


def rank_select(population, rng: np.random.Generator) -> HeuristicCandidate:
    """Draw one candidate with probability proportional to 1/(rank + m)."""
    if not population:
        raise ConfigError("population is empty")
    if any(c.fitness is None for c in population):
        raise ConfigError("rank_select requires every candidate to be scored")
    m = len(population)
    order = sorted(range(m), key=lambda i: -population[i].fitness)
    weights = np.empty(m)
    for rank0, idx in enumerate(order):
        weights[idx] = 1.0 / (rank0 + 1 + m)
    weights /= weights.sum()
    return population[int(rng.choice(m, p=weights))]


def build_prompt(task: str, parents) -> str:
    """Reproduction (or initialization) prompt for the given task."""
    if task not in TASK_TEMPLATES:
        raise ConfigError(f"unknown task {task!r}")
    description, template, signature = TASK_TEMPLATES[task]
    parts = [description, "", template.strip(), ""]
    if not parents:
        parts += [
            "Design a new heuristic from scratch. Together with the other requests "
            "in this round, the aim is to generate a diverse set of initial strategies.",
            "1. Describe your new heuristic in one sentence.",
            f"2. Implement it in a Python function with the exact signature "
            f"`{signature}`.",
        ]
        return "\n".join(parts)
    label = "is one existing heuristic" if len(parents) == 1 else \
        f"are {len(parents)} existing heuristics"
    parts.append(f"Here {label}:")
    for i, parent in enumerate(parents, start=1):
        parts += [f"No.{i} Heuristic description: {parent.idea_text}",
                  "```", parent.payload_text.rstrip("\n"), "```", ""]
    if len(parents) == 1:
        parts.append("Suggest a modification to this algorithm to improve its "
                     "performance.")
    else:
        parts.append("Design a new heuristic inspired by, but different from, the ones "
                     "provided. Combine the strategies of these two parent algorithms.")
    parts += [
        "1. Identify the common idea behind the provided heuristics.",
        "2. Describe your new heuristic in one sentence.",
        f"3. Implement it in a Python function with the exact signature `{signature}`.",
    ]
    return "\n".join(parts)


def parse_response(raw: str) -> HeuristicCandidate:
    """First fenced code block -> payload; last preceding line -> idea text."""
    match = _FENCE_RE.search(raw)
    if match is None:
        raise ParseError("response contains no fenced code block")
    body = match.group(1).strip()
    preceding = raw[: match.start()].strip().splitlines()
    idea = preceding[-1].strip() if preceding else ""
    native = _NATIVE_RE.match(body)
    if native:
        return HeuristicCandidate(idea_text=idea, native_id=native.group(1))
    return HeuristicCandidate(idea_text=idea, guest_source=body)


def _derived_seed(seed: int, realization: int) -> int:
    return int(np.random.SeedSequence((seed, realization)).generate_state(1)[0])


def _native_random_selection(evaluator: Evaluator, realization: int, seed: int):
    rng = SplitMix64(seed, realization)
    return rng.sample(evaluator.selected_n, evaluator.num_ports)


def _native_weighted_random(evaluator: Evaluator, realization: int, seed: int):
    h = evaluator.batch.realizations[realization]
    norms = np.linalg.norm(h, axis=1)
    rng = SplitMix64(seed, realization)
    return rng.weighted_sample(evaluator.selected_n, [float(x) for x in norms])


def _native_autoport(evaluator: Evaluator, realization: int, seed: int,
                     starts: int = 5):
    sel, _ = autoport(evaluator, realization,
                      GraspConfig(num_candidates_c=starts,
                                  seed=_derived_seed(seed, realization)))
    return list(sel)


def _native_exhaustive(evaluator: Evaluator, realization: int, seed: int):
    sel, _ = exhaustive_search(evaluator, realization, evaluator.selected_n)
    return list(sel)


NATIVE_SELECTORS = {
    "random_selection": _native_random_selection,
    "weighted_random": _native_weighted_random,
    "autoport": _native_autoport,
    "exhaustive": _native_exhaustive,
}

NATIVE_CROSSOVERS = {"basic": crossover_basic, "frequency": crossover_frequency}
NATIVE_MUTATIONS = {"basic": mutation_basic, "swap_noise": mutation_swap_noise}


def _score_selector(cand, evaluator, cfg) -> list:
    selector = NATIVE_SELECTORS.get(cand.native_id)
    if selector is None:
        raise ConfigError(f"unknown native selector {cand.native_id!r}")
    values = []
    for b in range(min(cfg.batch_b, evaluator.batch.batch_size)):
        if cand.native_id == "autoport":
            ports = selector(evaluator, b, cfg.seed, cfg.grasp_starts)
        else:
            ports = selector(evaluator, b, cfg.seed)
        values.append(evaluator.evaluate_selection(b, ports))
    return values


def _score_operator(cand, evaluator, cfg) -> list:
    if cfg.task == "crossover_op":
        crossover = NATIVE_CROSSOVERS.get(cand.native_id)
        mutation = mutation_basic  # the surrounding GA keeps its basic mutation
        if crossover is None:
            raise ConfigError(f"unknown native crossover {cand.native_id!r}")
    else:
        crossover = crossover_frequency  # mutation search runs on the evolved crossover
        mutation = NATIVE_MUTATIONS.get(cand.native_id)
        if mutation is None:
            raise ConfigError(f"unknown native mutation {cand.native_id!r}")
    values = []
    for b in range(min(cfg.batch_b, evaluator.batch.batch_size)):
        ga_cfg = GaConfig(population_m=cfg.ga.population_m,
                          elite_fraction_p=cfg.ga.elite_fraction_p,
                          iterations_i=cfg.ga.iterations_i,
                          seed=_derived_seed(cfg.seed, b))
        _, gamma, _ = run_ga(evaluator, b, ga_cfg, crossover=crossover,
                             mutation=mutation)
        values.append(gamma)
    return values


def evaluate_candidate(cand: HeuristicCandidate, batch_or_evaluator,
                       cfg: EvolutionConfig, sandbox=None) -> FitnessReport:
    """Score one candidate: mean balanced SINR over the evaluation batch.

    Native payloads dispatch to the built-in heuristics; guest payloads go
    through the sandbox runner. Failures are encoded in the status, never
    raised, so the evolution loop can keep going.
    """
    evaluator = batch_or_evaluator if isinstance(batch_or_evaluator, Evaluator) \
        else Evaluator(batch_or_evaluator)
    start = time.perf_counter()
    try:
        if cand.native_id is not None:
            if cfg.task == "full_port_selector":
                values = _score_selector(cand, evaluator, cfg)
            else:
                values = _score_operator(cand, evaluator, cfg)
            elapsed = time.perf_counter() - start
            # sequential mean: bit-identical to the worker's left-fold reduce
            mean = sum(values) / len(values)
            return FitnessReport(mean_min_sinr=float(mean),
                                 per_instance=[float(v) for v in values],
                                 wall_time_s=elapsed, status="ok")
        if sandbox is None:
            return FitnessReport(mean_min_sinr=-np.inf, per_instance=[],
                                 wall_time_s=time.perf_counter() - start,
                                 status="runtime_error",
                                 detail="no sandbox runner configured for guest code")
        return sandbox.run(cand.guest_source, cfg.task)
    except ConfigError as exc:
        return FitnessReport(mean_min_sinr=-np.inf, per_instance=[],
                             wall_time_s=time.perf_counter() - start,
                             status="invalid_output", detail=str(exc))
    except Exception as exc:  # guest/native runtime failure must not kill the loop
        return FitnessReport(mean_min_sinr=-np.inf, per_instance=[],
                             wall_time_s=time.perf_counter() - start,
                             status="runtime_error", detail=str(exc))


def manage(current, offspring, m: int | None = None):
    """Top-m of the union by fitness; ties keep current members first."""
    m = m if m is not None else len(current)
    decorated = [(-(c.fitness if c.fitness is not None else -np.inf), 0, i, c)
                 for i, c in enumerate(current)]
    decorated += [(-(c.fitness if c.fitness is not None else -np.inf), 1, i, c)
                  for i, c in enumerate(offspring)]
    decorated.sort(key=lambda t: t[:3])
    return [c for *_, c in decorated[:m]]


@dataclass
class EvaluationRecord:
    generation: int
    candidate_id: str
    parent_ids: tuple
    status: str
    fitness: float | None
    wall_time_s: float


@dataclass
class EvolutionLog:
    evaluations: list = field(default_factory=list)
    generations: list = field(default_factory=list)  # {generation, best, mean}
    parse_failures: int = 0
    charged: int = 0
    partial: bool = False


def evolve(cfg: EvolutionConfig, batch: ChannelBatch, provider, sandbox=None):
    """Run the full evolutionary search; returns (best candidate, EvolutionLog)."""
    evaluator = Evaluator(batch)
    rng = np.random.default_rng(cfg.seed)
    log = EvolutionLog()
    population: list[HeuristicCandidate] = []
    best: HeuristicCandidate | None = None

    def request(prompt: str) -> str:
        return call_with_retries(provider, SYSTEM_PROMPT, prompt,
                                 retries=cfg.provider_retries,
                                 backoff_s=cfg.retry_backoff_s)

    def spawn(generation: int, index: int, parents) -> HeuristicCandidate | None:
        nonlocal best
        if log.charged >= cfg.eval_budget_f:
            return None
        prompt = build_prompt(cfg.task, parents)
        raw = request(prompt)
        try:
            cand = parse_response(raw)
        except ParseError:
            log.parse_failures += 1
            return None
        cand.generation = generation
        cand.candidate_id = f"g{generation}c{index}"
        cand.parent_ids = tuple(p.candidate_id for p in parents)
        report = evaluate_candidate(cand, evaluator, cfg, sandbox=sandbox)
        log.charged += 1
        cand.fitness = report.mean_min_sinr if report.status == "ok" else -np.inf
        log.evaluations.append(EvaluationRecord(
            generation=generation, candidate_id=cand.candidate_id,
            parent_ids=cand.parent_ids, status=report.status,
            fitness=None if report.status != "ok" else report.mean_min_sinr,
            wall_time_s=report.wall_time_s))
        if best is None or cand.fitness > best.fitness:
            best = cand
        return cand

    def snapshot(generation: int):
        scored = [c.fitness for c in population if c.fitness is not None
                  and np.isfinite(c.fitness)]
        log.generations.append({
            "generation": generation,
            "best": float(best.fitness) if best is not None
                    and np.isfinite(best.fitness) else None,
            "mean": float(np.mean(scored)) if scored else None,
        })

    try:
        for i in range(cfg.population_m):
            cand = spawn(0, i, [])
            if cand is not None:
                population.append(cand)
        snapshot(0)
        for gen in range(1, cfg.generations_g + 1):
            if log.charged >= cfg.eval_budget_f or not population:
                break
            offspring = []
            for j in range(cfg.population_m):
                if log.charged >= cfg.eval_budget_f:
                    break
                arity = 2 if j % 2 == 0 else 1
                parents = [rank_select(population, rng) for _ in range(arity)]
                cand = spawn(gen, j, parents)
                if cand is not None:
                    offspring.append(cand)
            population = manage(population, offspring, m=cfg.population_m)
            snapshot(gen)
    except ProviderError:
        log.partial = True
    return best, log
