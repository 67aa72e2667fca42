/**
 * Compact elitist GA used to score operator-task candidates: the guest
 * crossover or mutation is spliced into this loop, every selection is
 * scored through the host, and the best value per realization is the
 * candidate's score for that realization.
 */

import { SplitMix64 } from "./rng";
import { checkMatrix, InvalidOutput } from "./guest";

export interface GaParams {
  population: number;
  eliteFraction: number;
  iterations: number;
}

export const DEFAULT_GA: GaParams = { population: 8, eliteFraction: 0.25, iterations: 10 };

export type Operator = (...args: unknown[]) => unknown;

function randomSelection(rng: SplitMix64, n: number, totalPorts: number): number[] {
  return rng.sample(n, totalPorts);
}

export function basicCrossover(
  parents: number[][],
  count: number,
  rng: SplitMix64,
): number[][] {
  const n = parents[0].length;
  const half = Math.ceil(n / 2);
  const out: number[][] = [];
  for (let i = 0; i < count; i++) {
    const a = parents[rng.nextBelow(parents.length)];
    const b = parents[rng.nextBelow(parents.length)];
    out.push(a.slice(0, half).concat(b.slice(half)));
  }
  return out;
}

export function basicMutation(
  population: number[][],
  totalPorts: number,
  rng: SplitMix64,
): number[][] {
  return population.map((row) => {
    const out = row.slice();
    if (totalPorts > 1) {
      const j = rng.nextBelow(out.length);
      const shift = 1 + rng.nextBelow(totalPorts - 1);
      out[j] = (out[j] + shift) % totalPorts;
    }
    return out;
  });
}

export function repairRow(row: number[], totalPorts: number, rng: SplitMix64): number[] {
  const out = row.slice();
  const present = new Set(out);
  const seen = new Set<number>();
  for (let i = 0; i < out.length; i++) {
    const v = out[i];
    if (!seen.has(v)) {
      seen.add(v);
      continue;
    }
    const free: number[] = [];
    for (let p = 0; p < totalPorts; p++) {
      if (!present.has(p)) free.push(p);
    }
    const pick = free[rng.nextBelow(free.length)];
    out[i] = pick;
    present.add(pick);
    seen.add(pick);
  }
  return out;
}

export interface GaHooks {
  /** guest operator for the task under evaluation, or null for the built-in */
  crossover: Operator | null;
  mutation: Operator | null;
}

export function runGa(
  evaluate: (ports: number[]) => number,
  n: number,
  totalPorts: number,
  seed: number,
  hooks: GaHooks,
  params: GaParams = DEFAULT_GA,
): number {
  const rng = new SplitMix64(seed, 0xa11ce);
  const m = params.population;
  const elites = Math.max(1, Math.round(m * params.eliteFraction));
  let pop: number[][] = [];
  for (let i = 0; i < m; i++) pop.push(randomSelection(rng, n, totalPorts));
  let best = -Infinity;
  for (let iter = 0; iter < params.iterations; iter++) {
    const scored = pop.map((row, i) => ({ row, i, value: evaluate(row) }));
    scored.sort((a, b) => b.value - a.value || a.i - b.i);
    if (scored[0].value > best) best = scored[0].value;
    const parents = scored.slice(0, Math.floor(m / 2)).map((s) => s.row);
    const eliteRows = scored.slice(0, elites).map((s) => s.row);
    const childCount = m - elites;
    let children: number[][];
    if (hooks.crossover) {
      children = checkMatrix(hooks.crossover(parents, childCount), childCount, n,
        totalPorts);
    } else {
      children = basicCrossover(parents, childCount, rng);
    }
    if (hooks.mutation) {
      children = checkMatrix(hooks.mutation(children, totalPorts), childCount, n,
        totalPorts);
    } else {
      children = basicMutation(children, totalPorts, rng);
    }
    pop = eliteRows.concat(children.map((row) => repairRow(row, totalPorts, rng)));
  }
  if (!Number.isFinite(best)) {
    throw new InvalidOutput("GA produced no finite score");
  }
  return best;
}
