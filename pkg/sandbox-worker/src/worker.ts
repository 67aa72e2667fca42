/**
 * Sandbox worker entry point.
 *
 * Session: read `init` (refusing version mismatches), read `run`, execute
 * the guest for the configured task, delegate every SINR evaluation to the
 * host, then emit `done` or a structured `fail`. Exit code 0 on a clean
 * done/fail; anything else is a crash the host maps to runtime_error.
 */

import { loadChannelFile, ChannelFile } from "./fchan";
import { checkRow, GuestError, InvalidOutput, loadGuestFunction } from "./guest";
import { DEFAULT_GA, runGa } from "./ga";
import { EvalClient, EvalRejected, LineReader, ProtocolError, writeMessage } from "./protocol";

const PROTOCOL_VERSION = 1;

interface InitMessage {
  kind: string;
  version: number;
  task: string;
  limits: { wall_timeout_s: number; max_eval_calls: number };
  channel_path: string;
  K: number;
  n: number;
  N: number;
  P_mw: number;
  noise_mw: number;
  B: number;
}

function fail(status: string, message: string): never {
  writeMessage({ kind: "fail", status, message });
  process.exit(0);
}

function readMessage(reader: LineReader): Record<string, unknown> {
  const line = reader.readLine();
  if (line === null) {
    process.exit(1); // host vanished: crash, not a clean fail
  }
  try {
    return JSON.parse(line);
  } catch {
    fail("runtime_error", `malformed protocol line: ${line.slice(0, 200)}`);
  }
}

function scoreSelector(
  source: string,
  init: InitMessage,
  channel: ChannelFile,
  client: EvalClient,
): number[] {
  const shim = (realization: number, ports: number[]) =>
    client.evaluate(realization, ports);
  const fn = loadGuestFunction(source, "full_port_selector", shim);
  const result = fn(init.K, init.n, init.N, init.P_mw, init.B, channel.data,
    init.noise_mw);
  if (!Array.isArray(result) || result.length !== init.B) {
    throw new InvalidOutput(`select_ports must return ${init.B} rows`);
  }
  const values: number[] = [];
  for (let b = 0; b < init.B; b++) {
    const ports = checkRow(result[b], init.n, init.N);
    values.push(client.evaluate(b, ports));
  }
  return values;
}

function scoreOperator(
  source: string,
  init: InitMessage,
  client: EvalClient,
): number[] {
  const shim = (realization: number, ports: number[]) =>
    client.evaluate(realization, ports);
  const fn = loadGuestFunction(source, init.task, shim);
  const hooks = init.task === "crossover_op"
    ? { crossover: fn, mutation: null }
    : { crossover: null, mutation: fn };
  const values: number[] = [];
  for (let b = 0; b < init.B; b++) {
    const evaluate = (ports: number[]) => client.evaluate(b, ports);
    values.push(runGa(evaluate, init.n, init.N, b, hooks, DEFAULT_GA));
  }
  return values;
}

function main(): void {
  const reader = new LineReader(0);
  const initMsg = readMessage(reader) as unknown as InitMessage;
  if (initMsg.kind !== "init") {
    fail("runtime_error", `expected init, got ${initMsg.kind}`);
  }
  if (initMsg.version !== PROTOCOL_VERSION) {
    fail("runtime_error",
      `protocol version mismatch: host ${initMsg.version}, worker ${PROTOCOL_VERSION}`);
  }
  const runMsg = readMessage(reader);
  if (runMsg.kind !== "run" || typeof runMsg.source !== "string") {
    fail("runtime_error", "expected run message with source");
  }
  let channel: ChannelFile;
  try {
    channel = loadChannelFile(initMsg.channel_path);
  } catch (err) {
    fail("runtime_error", `cannot load channel file: ${err}`);
  }
  const client = new EvalClient(reader);
  try {
    const values = initMsg.task === "full_port_selector"
      ? scoreSelector(runMsg.source, initMsg, channel, client)
      : scoreOperator(runMsg.source, initMsg, client);
    const fitness = values.reduce((a, b) => a + b, 0) / values.length;
    writeMessage({
      kind: "done",
      fitness,
      per_instance: values,
      eval_calls: client.evalCalls,
    });
    process.exit(0);
  } catch (err) {
    if (err instanceof EvalRejected || err instanceof InvalidOutput) {
      fail("invalid_output", String(err.message ?? err));
    }
    if (err instanceof ProtocolError) {
      fail("runtime_error", String(err.message ?? err));
    }
    if (err instanceof GuestError) {
      fail("runtime_error", String(err.message ?? err));
    }
    fail("runtime_error", `guest raised: ${err}`);
  }
}

main();
