/** fchan v1 channel file loading (read-only; the only file the worker touches). */

import * as fs from "fs";

export interface ChannelFile {
  B: number;
  N: number;
  K: number;
  /** data[b][port][user] = [re, im] */
  data: number[][][][];
}

export function loadChannelFile(path: string): ChannelFile {
  const doc = JSON.parse(fs.readFileSync(path, "utf8"));
  if (doc.version !== 1) {
    throw new Error(`unsupported fchan version ${doc.version}`);
  }
  const data = doc.data;
  if (!Array.isArray(data) || data.length !== doc.B) {
    throw new Error("fchan data does not match B");
  }
  const n = data[0].length;
  const k = data[0][0].length;
  return { B: doc.B, N: n, K: k, data };
}

/** Per-port 2-norm of one realization's N x K channel slice. */
export function portNorms(real: ChannelFile, b: number): number[] {
  const slice = real.data[b];
  return slice.map((row) => {
    let acc = 0;
    for (const [re, im] of row) acc += re * re + im * im;
    return Math.sqrt(acc);
  });
}
