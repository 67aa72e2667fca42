import { spawn } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

const WORKER = path.join(__dirname, "..", "dist", "worker.js");

interface Session {
  messages: Array<Record<string, unknown>>;
  exitCode: number | null;
}

function makeChannelFile(B: number, N: number, K: number): string {
  const data = Array.from({ length: B }, (_, b) =>
    Array.from({ length: N }, (_, p) =>
      Array.from({ length: K }, (_, k) => [1 + b + 0.1 * p + 0.01 * k, -0.5 * k]),
    ),
  );
  const doc = {
    version: 1,
    array: { n_x: 2, n_y: N / 2, w_x: 1.0, w_y: 1.0 },
    scenario: { users_k: K, selected_n: 2 },
    B,
    data,
  };
  const file = path.join(os.tmpdir(), `chan-${process.pid}-${Math.random()}.json`);
  fs.writeFileSync(file, JSON.stringify(doc));
  return file;
}

/**
 * Drive one full protocol session against the built worker, answering every
 * eval with `score(realization, ports)`.
 */
function runSession(
  channelPath: string,
  source: string,
  opts: {
    task?: string;
    B?: number;
    N?: number;
    score?: (b: number, ports: number[]) => number | { error: string };
    version?: number;
  } = {},
): Promise<Session> {
  const task = opts.task ?? "full_port_selector";
  const B = opts.B ?? 3;
  const N = opts.N ?? 4;
  const score = opts.score ?? ((b, ports) => ports.reduce((a, v) => a + v, 0) + b);
  return new Promise((resolve, reject) => {
    const child = spawn("node", [WORKER], { stdio: ["pipe", "pipe", "inherit"] });
    const messages: Array<Record<string, unknown>> = [];
    let buffer = "";
    const timer = setTimeout(() => {
      child.kill("SIGKILL");
      reject(new Error("worker session timed out"));
    }, 15000);
    child.stdout.on("data", (chunk) => {
      buffer += chunk.toString();
      let idx;
      while ((idx = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, idx);
        buffer = buffer.slice(idx + 1);
        if (!line.trim()) continue;
        const msg = JSON.parse(line);
        messages.push(msg);
        if (msg.kind === "eval") {
          const result = score(msg.realization, msg.ports);
          const reply =
            typeof result === "number"
              ? { kind: "eval_result", value: result }
              : { kind: "eval_result", error: result.error };
          child.stdin.write(JSON.stringify(reply) + "\n");
        }
      }
    });
    child.on("close", (code) => {
      clearTimeout(timer);
      resolve({ messages, exitCode: code });
    });
    const init = {
      kind: "init",
      version: opts.version ?? 1,
      task,
      limits: { wall_timeout_s: 10, max_eval_calls: 10000 },
      channel_path: channelPath,
      K: 2,
      n: 2,
      N,
      P_mw: 100.0,
      noise_mw: 1.0,
      B,
    };
    child.stdin.write(JSON.stringify(init) + "\n");
    child.stdin.write(JSON.stringify({ kind: "run", source }) + "\n");
  });
}

let channelPath: string;

beforeAll(() => {
  channelPath = makeChannelFile(3, 4, 2);
});

afterAll(() => {
  fs.unlinkSync(channelPath);
});

describe("worker protocol sessions", () => {
  it("scores a constant selector and reports matching eval counts", async () => {
    const source = `
      function select_ports(K, n, N, Pt, B, H, noise_power) {
        const out = [];
        for (let b = 0; b < B; b++) out.push([0, 1]);
        return out;
      }`;
    const session = await runSession(channelPath, source);
    const done = session.messages.at(-1)!;
    expect(done.kind).toBe("done");
    const evals = session.messages.filter((m) => m.kind === "eval");
    expect(evals).toHaveLength(3);
    expect(done.eval_calls).toBe(3);
    // score(b, [0,1]) = 1 + b -> mean = 2
    expect(done.fitness).toBe(2);
    expect(done.per_instance).toEqual([1, 2, 3]);
    expect(session.exitCode).toBe(0);
  });

  it("lets guests call the shim during construction", async () => {
    const source = `
      function select_ports(K, n, N, Pt, B, H, noise_power) {
        const out = [];
        for (let b = 0; b < B; b++) {
          const a = sinr_balancing(b, [0, 1]);
          const c = sinr_balancing(b, [2, 3]);
          out.push(a >= c ? [0, 1] : [2, 3]);
        }
        return out;
      }`;
    const session = await runSession(channelPath, source, {
      score: (b, ports) => ports[0] === 0 ? 1 : 5,
    });
    const done = session.messages.at(-1)!;
    expect(done.kind).toBe("done");
    expect(done.fitness).toBe(5);
    expect(done.eval_calls).toBe(9); // 2 probes + 1 scoring call per realization
  });

  it("maps repeated ports to invalid_output without any eval", async () => {
    const source = `
      function select_ports(K, n, N, Pt, B, H) {
        return [[1, 1], [0, 1], [0, 1]];
      }`;
    const session = await runSession(channelPath, source);
    const last = session.messages.at(-1)!;
    expect(last.kind).toBe("fail");
    expect(last.status).toBe("invalid_output");
    expect(session.messages.filter((m) => m.kind === "eval")).toHaveLength(0);
    expect(session.exitCode).toBe(0);
  });

  it("surfaces host eval errors as invalid_output", async () => {
    const source = `
      function select_ports(K, n, N, Pt, B, H) {
        return [[0, 1], [0, 1], [0, 1]];
      }`;
    const session = await runSession(channelPath, source, {
      score: () => ({ error: "port out of range" }),
    });
    const last = session.messages.at(-1)!;
    expect(last.kind).toBe("fail");
    expect(last.status).toBe("invalid_output");
  });

  it("maps guest exceptions to runtime_error with zero evals", async () => {
    const source = `function select_ports() { throw new Error("nope"); }`;
    const session = await runSession(channelPath, source);
    const last = session.messages.at(-1)!;
    expect(last.kind).toBe("fail");
    expect(last.status).toBe("runtime_error");
    expect(session.messages.filter((m) => m.kind === "eval")).toHaveLength(0);
    expect(session.exitCode).toBe(0);
  });

  it("refuses protocol version mismatches", async () => {
    const session = await runSession(channelPath, "function select_ports() {}", {
      version: 99,
    });
    const last = session.messages.at(-1)!;
    expect(last.kind).toBe("fail");
    expect(last.status).toBe("runtime_error");
    expect(String(last.message)).toContain("version");
  });

  it("runs the operator-task GA with a guest crossover", async () => {
    const source = `
      function crossover(parents, M) {
        const n = parents[0].length;
        const out = [];
        for (let i = 0; i < M; i++) out.push(parents[i % parents.length].slice());
        return out;
      }`;
    const session = await runSession(channelPath, source, { task: "crossover_op" });
    const done = session.messages.at(-1)!;
    expect(done.kind).toBe("done");
    expect(done.per_instance).toHaveLength(3);
    expect(session.exitCode).toBe(0);
  });

  it("runs the operator-task GA with a guest mutation", async () => {
    const source = `
      function mutation(population, N) {
        return population.map(row => row.slice());
      }`;
    const session = await runSession(channelPath, source, { task: "mutation_op" });
    const done = session.messages.at(-1)!;
    expect(done.kind).toBe("done");
    expect(done.per_instance).toHaveLength(3);
  });
});
