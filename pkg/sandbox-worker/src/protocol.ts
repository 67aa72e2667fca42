/**
 * Newline-delimited JSON over stdin/stdout, strictly request-response.
 *
 * Reads use blocking fs.readSync on fd 0 (the host spawns us with a pipe in
 * blocking mode and never pipelines), so guest-facing shims can stay
 * synchronous like the documented template.
 */

import * as fs from "fs";

const CHUNK = 65536;

export class LineReader {
  private buffer = "";
  private eof = false;
  private readonly chunk = Buffer.alloc(CHUNK);

  constructor(private readonly fd: number = 0) {}

  /** Next full line (without newline), or null at EOF. */
  readLine(): string | null {
    for (;;) {
      const idx = this.buffer.indexOf("\n");
      if (idx >= 0) {
        const line = this.buffer.slice(0, idx);
        this.buffer = this.buffer.slice(idx + 1);
        return line;
      }
      if (this.eof) {
        return null;
      }
      let n = 0;
      try {
        n = fs.readSync(this.fd, this.chunk, 0, CHUNK, null);
      } catch (err: unknown) {
        const code = (err as NodeJS.ErrnoException).code;
        if (code === "EAGAIN") {
          continue; // pipe briefly drained under a nonblocking fd
        }
        if (code === "EOF") {
          n = 0;
        } else {
          throw err;
        }
      }
      if (n === 0) {
        this.eof = true;
        continue;
      }
      this.buffer += this.chunk.toString("utf8", 0, n);
    }
  }
}

export function writeMessage(msg: Record<string, unknown>, fd: number = 1): void {
  fs.writeSync(fd, JSON.stringify(msg) + "\n");
}

export class ProtocolError extends Error {}

export class EvalClient {
  evalCalls = 0;

  constructor(private readonly reader: LineReader) {}

  /** Ask the host for the balanced SINR of one selection. */
  evaluate(realization: number, ports: number[]): number {
    writeMessage({ kind: "eval", realization, ports });
    this.evalCalls += 1;
    const line = this.reader.readLine();
    if (line === null) {
      throw new ProtocolError("host closed the pipe during eval");
    }
    let msg: { kind?: string; value?: number; error?: string };
    try {
      msg = JSON.parse(line);
    } catch {
      throw new ProtocolError(`malformed eval_result line: ${line}`);
    }
    if (msg.kind !== "eval_result") {
      throw new ProtocolError(`unexpected message kind ${msg.kind} during eval`);
    }
    if (typeof msg.error === "string") {
      throw new EvalRejected(msg.error);
    }
    if (typeof msg.value !== "number") {
      throw new ProtocolError("eval_result carries neither value nor error");
    }
    return msg.value;
  }
}

/** The host refused an evaluation (invalid selection, exhausted budget). */
export class EvalRejected extends Error {}
