"""Port-selection algorithms: exhaustive, random, GA variants, AutoPort.

All algorithms score selections through an Evaluator (memoized balanced
SINR per selection), so the per-run evaluation counters mirror the cost
model used when comparing methods.

GA operators come in two flavours each: the plain split/resample
("basic") operators, and the evolved ones — gene-frequency crossover with
probabilistic inheritance ("frequency") and pair-swap plus bounded integer
noise ("swap_noise").
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .balancing import Evaluator
from .errors import ConfigError, RefusalError

EXHAUSTIVE_CAP = 10**6


@dataclass(frozen=True)
class PortSelection:
    """n distinct 0-based port indices."""

    ports: tuple

    def __init__(self, ports, num_ports=None):
        ports = tuple(int(p) for p in ports)
        if len(set(ports)) != len(ports):
            raise ConfigError(f"repeated ports in selection: {ports}")
        if ports and min(ports) < 0:
            raise ConfigError(f"negative port index in {ports}")
        if num_ports is not None and ports and max(ports) >= num_ports:
            raise ConfigError(f"port index >= N={num_ports} in {ports}")
        object.__setattr__(self, "ports", ports)

    def __iter__(self):
        return iter(self.ports)

    def __len__(self):
        return len(self.ports)


@dataclass(frozen=True)
class GaConfig:
    population_m: int = 20
    elite_fraction_p: float = 0.2
    iterations_i: int = 100
    crossover_kind: str = "basic"
    mutation_kind: str = "basic"
    seed: int = 0

    def __post_init__(self):
        if self.population_m < 4 or self.population_m % 2:
            raise ConfigError("population_m must be an even integer >= 4")
        if not (0.0 < self.elite_fraction_p < 1.0):
            raise ConfigError("elite_fraction_p must be in (0, 1)")
        if self.iterations_i < 1:
            raise ConfigError("iterations_i must be >= 1")
        if self.crossover_kind not in ("basic", "frequency"):
            raise ConfigError(f"unknown crossover_kind {self.crossover_kind!r}")
        if self.mutation_kind not in ("basic", "swap_noise"):
            raise ConfigError(f"unknown mutation_kind {self.mutation_kind!r}")
        if not (1 <= self.elite_count < self.population_m):
            raise ConfigError("elite count round(M*p) must be >= 1 and < M")

    @property
    def elite_count(self) -> int:
        return int(round(self.population_m * self.elite_fraction_p))


@dataclass(frozen=True)
class GraspConfig:
    num_candidates_c: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.num_candidates_c < 1:
            raise ConfigError("num_candidates_c must be >= 1")


def random_selection(n: int, num_ports: int, rng: np.random.Generator) -> PortSelection:
    """Uniform n-subset of [0, N) without replacement."""
    if n > num_ports:
        raise ConfigError(f"cannot select {n} of {num_ports} ports")
    return PortSelection(rng.choice(num_ports, size=n, replace=False), num_ports)


def exhaustive_search(evaluator: Evaluator, realization: int, n: int,
                      cap: int = EXHAUSTIVE_CAP):
    """Best selection over every n-subset, lexicographic tie-break.

    Refuses when C(N, n) exceeds the enumeration cap.
    """
    num_ports = evaluator.num_ports
    count = comb(num_ports, n)
    if count > cap:
        raise RefusalError(
            f"exhaustive search over C({num_ports}, {n}) = {count} selections "
            f"exceeds the cap of {cap}")
    best_sel = None
    best_gamma = -np.inf
    for sel in combinations(range(num_ports), n):
        gamma = evaluator.evaluate_selection(realization, sel)
        if gamma > best_gamma:
            best_gamma = gamma
            best_sel = sel
    return PortSelection(best_sel, num_ports), float(best_gamma)


def crossover_basic(parents: np.ndarray, offspring_count: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Front half from one uniformly drawn parent, back half from another."""
    parents = np.asarray(parents)
    n_parents, n = parents.shape
    if n_parents < 2:
        raise ConfigError("need at least 2 parents")
    half = (n + 1) // 2
    first = rng.integers(0, n_parents, size=offspring_count)
    second = rng.integers(0, n_parents, size=offspring_count)
    out = np.empty((offspring_count, n), dtype=parents.dtype)
    out[:, :half] = parents[first, :half]
    out[:, half:] = parents[second, half:]
    return out


def crossover_frequency(parents: np.ndarray, offspring_count: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Gene-frequency crossover with probabilistic inheritance.

    Per position, the relative frequency of each port value across all
    parents is tabulated; each offspring draws two distinct parents and
    inherits, per gene, the value with the strictly higher positional
    frequency (coin flip on ties).
    """
    parents = np.asarray(parents)
    n_parents, n = parents.shape
    if n_parents < 2:
        raise ConfigError("need at least 2 parents")
    width = int(parents.max()) + 1
    gene_freq = np.zeros((n, width))
    for j in range(n):
        unique, counts = np.unique(parents[:, j], return_counts=True)
        gene_freq[j, unique] = counts / n_parents
    out = np.empty((offspring_count, n), dtype=parents.dtype)
    for i in range(offspring_count):
        p1, p2 = parents[rng.choice(n_parents, 2, replace=False)]
        for j in range(n):
            f1 = gene_freq[j, p1[j]]
            f2 = gene_freq[j, p2[j]]
            if f1 > f2:
                out[i, j] = p1[j]
            elif f1 < f2:
                out[i, j] = p2[j]
            else:
                out[i, j] = p1[j] if rng.random() < 0.5 else p2[j]
    return out


def mutation_basic(population: np.ndarray, num_ports: int,
                   rng: np.random.Generator) -> np.ndarray:
    """One uniformly chosen gene per individual is moved to a different port."""
    population = np.asarray(population)
    out = population.copy()
    if num_ports <= 1:
        return out
    rows, n = out.shape
    for i in range(rows):
        j = int(rng.integers(0, n))
        shift = int(rng.integers(1, num_ports))  # offset avoids the current value
        out[i, j] = (out[i, j] + shift) % num_ports
    return out


def mutation_swap_noise(population: np.ndarray, num_ports: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Pair swap (p = 0.7 * 0.5), then bounded uniform integer noise.

    Noise hits m = max(1, floor(0.15 n)) distinct positions per individual,
    uniform in [-N/5, N/5], rounded and clipped into [0, N-1].
    """
    population = np.asarray(population)
    out = population.copy()
    rows, n = out.shape
    for i in range(rows):
        if rng.random() < 0.7 and n > 1 and rng.random() < 0.5:
            idx1, idx2 = rng.choice(n, size=2, replace=False)
            out[i, idx1], out[i, idx2] = out[i, idx2], out[i, idx1]
        num_mut = max(1, int(n * 0.15))
        idxs = rng.choice(n, size=num_mut, replace=False)
        noise = rng.uniform(-num_ports / 5, num_ports / 5, num_mut)
        out[i, idxs] = np.clip(np.round(out[i, idxs] + noise), 0, num_ports - 1).astype(out.dtype)
    return out


def repair(selection, num_ports: int, rng: np.random.Generator) -> PortSelection:
    """Replace duplicate ports with uniformly chosen absent ones.

    First occurrences are kept untouched; each later duplicate gets a
    uniform draw from the ports not currently present.
    """
    values = [int(v) for v in selection]
    if len(values) > num_ports:
        raise ConfigError(f"cannot repair {len(values)} ports into [0, {num_ports})")
    if any(v < 0 or v >= num_ports for v in values):
        raise ConfigError(f"port index outside [0, {num_ports}) in {values}")
    present = set(values)
    seen = set()
    for i, v in enumerate(values):
        if v not in seen:
            seen.add(v)
            continue
        free = sorted(set(range(num_ports)) - present)
        pick = free[int(rng.integers(0, len(free)))]
        values[i] = pick
        present.add(pick)
        seen.add(pick)
    return PortSelection(values, num_ports)


def _random_population(rows: int, n: int, num_ports: int,
                       rng: np.random.Generator) -> np.ndarray:
    return np.stack([rng.choice(num_ports, size=n, replace=False) for _ in range(rows)])


_CROSSOVERS = {"basic": crossover_basic, "frequency": crossover_frequency}
_MUTATIONS = {"basic": mutation_basic, "swap_noise": mutation_swap_noise}


def run_ga(evaluator: Evaluator, realization: int, cfg: GaConfig,
           crossover=None, mutation=None):
    """Elitist GA over port selections.

    Per iteration: score the population, keep the best Mp as elites, breed
    M - Mp children from the best M/2 parents via crossover + mutation,
    repair duplicates, merge. Returns (best selection, best gamma,
    best-so-far history per iteration).

    crossover/mutation override the configured operators; they must follow
    the (parents, count, rng) / (population, N, rng) contracts. Used when
    scoring evolved operator candidates.
    """
    num_ports = evaluator.num_ports
    n = evaluator.selected_n
    if n > num_ports:
        raise ConfigError(f"cannot select {n} of {num_ports} ports")
    crossover = crossover or _CROSSOVERS[cfg.crossover_kind]
    mutation = mutation or _MUTATIONS[cfg.mutation_kind]
    rng = np.random.default_rng(cfg.seed)
    m = cfg.population_m
    elite_count = cfg.elite_count
    pop = _random_population(m, n, num_ports, rng)
    best_gamma = -np.inf
    best_sel = None
    history = []
    for _ in range(cfg.iterations_i):
        gammas = np.array([evaluator.evaluate_selection(realization, row) for row in pop])
        order = np.argsort(-gammas, kind="stable")
        if gammas[order[0]] > best_gamma:
            best_gamma = float(gammas[order[0]])
            best_sel = pop[order[0]].copy()
        history.append(best_gamma)
        parents = pop[order[: m // 2]]
        elites = pop[order[:elite_count]]
        children = crossover(parents, m - elite_count, rng)
        children = mutation(children, num_ports, rng)
        children = np.stack([np.fromiter(repair(row, num_ports, rng), dtype=int)
                             for row in children])
        pop = np.concatenate([elites, children], axis=0)
    return PortSelection(best_sel, num_ports), best_gamma, history


def autoport(evaluator: Evaluator, realization: int, cfg: GraspConfig):
    """GRASP port selection: weighted-random constructions + exchange local search.

    Each start draws n ports without replacement with probabilities
    proportional to the per-port channel row norms, then sweeps
    single-position substitutions (candidates in ascending port order),
    accepting any strict improvement immediately, until a full sweep passes
    without improvement. Best start wins; ties go to the earlier start.
    """
    num_ports = evaluator.num_ports
    n = evaluator.selected_n
    rng = np.random.default_rng(cfg.seed)
    h = evaluator.batch.realizations[realization]
    port_norms = np.linalg.norm(h, axis=1)
    total = port_norms.sum()
    weights = port_norms / total if total > 0 else np.full(num_ports, 1.0 / num_ports)
    best_gamma = -np.inf
    best_sel = None
    for _ in range(cfg.num_candidates_c):
        candidate = rng.choice(num_ports, size=n, replace=False, p=weights)
        improved = True
        current = evaluator.evaluate_selection(realization, candidate)
        while improved:
            improved = False
            current = evaluator.evaluate_selection(realization, candidate)
            for j in range(n):
                for alt in range(num_ports):
                    if alt in candidate:
                        continue
                    trial = candidate.copy()
                    trial[j] = alt
                    gamma = evaluator.evaluate_selection(realization, trial)
                    if gamma > current:
                        candidate = trial
                        current = gamma
                        improved = True
        if current > best_gamma:
            best_gamma = float(current)
            best_sel = candidate.copy()
    return PortSelection(best_sel, num_ports), best_gamma
