/**
 * Guest execution: LLM-written JavaScript runs in a bare vm context with
 * only the sinr_balancing shim, the channel tensor and standard JS
 * built-ins. Process-level isolation (no require/process/network) --
 * the host enforces the wall clock by killing us.
 */

import * as vm from "vm";

export class GuestError extends Error {}
export class InvalidOutput extends Error {}

const TASK_FUNCTIONS: Record<string, string> = {
  full_port_selector: "select_ports",
  crossover_op: "crossover",
  mutation_op: "mutation",
};

export function loadGuestFunction(
  source: string,
  task: string,
  shim: (realization: number, ports: number[]) => number,
): (...args: unknown[]) => unknown {
  const name = TASK_FUNCTIONS[task];
  if (!name) {
    throw new GuestError(`unknown task ${task}`);
  }
  const context = vm.createContext({ sinr_balancing: shim });
  try {
    vm.runInContext(source, context, { filename: "guest.js" });
  } catch (err) {
    throw new GuestError(`guest source failed to load: ${err}`);
  }
  const fn = (context as Record<string, unknown>)[name];
  if (typeof fn !== "function") {
    throw new InvalidOutput(`guest source does not define function ${name}`);
  }
  return fn as (...args: unknown[]) => unknown;
}

/** Coerce and check one selection row: n distinct integers in [0, N). */
export function checkRow(row: unknown, n: number, totalPorts: number): number[] {
  if (!Array.isArray(row) || row.length !== n) {
    throw new InvalidOutput(`selection row must have ${n} entries`);
  }
  const out: number[] = [];
  const seen = new Set<number>();
  for (const v of row) {
    if (typeof v !== "number" || !Number.isInteger(v) || v < 0 || v >= totalPorts) {
      throw new InvalidOutput(`port ${v} outside 0..${totalPorts - 1}`);
    }
    if (seen.has(v)) {
      throw new InvalidOutput(`ports cannot be repeated (${v})`);
    }
    seen.add(v);
    out.push(v);
  }
  return out;
}

/** Check an integer matrix of the given shape with entries in [0, N). */
export function checkMatrix(
  value: unknown,
  rows: number,
  cols: number,
  totalPorts: number,
): number[][] {
  if (!Array.isArray(value) || value.length !== rows) {
    throw new InvalidOutput(`expected ${rows} rows`);
  }
  return value.map((row) => {
    if (!Array.isArray(row) || row.length !== cols) {
      throw new InvalidOutput(`expected rows of length ${cols}`);
    }
    return row.map((v) => {
      if (typeof v !== "number" || !Number.isInteger(v) || v < 0 || v >= totalPorts) {
        throw new InvalidOutput(`entry ${v} outside 0..${totalPorts - 1}`);
      }
      return v;
    });
  });
}
