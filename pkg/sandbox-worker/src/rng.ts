/**
 * splitmix64 stream, bit-identical to the host's portable RNG.
 *
 * state0(seed, stream) = seed XOR ((stream + 1) * GOLDEN)  (mod 2^64)
 * next(): state += GOLDEN; finalize with the splitmix64 mix.
 * nextBelow(k) = next() % k; nextFloat() = (next() >> 11) / 2^53;
 * sample(n, N) = first n entries of a partial Fisher-Yates shuffle.
 */

const GOLDEN = 0x9e3779b97f4a7c15n;
const MASK64 = (1n << 64n) - 1n;

export class SplitMix64 {
  private state: bigint;

  constructor(seed: bigint | number, stream: bigint | number = 0) {
    const s = BigInt(seed) & MASK64;
    const st = BigInt(stream) & MASK64;
    this.state = (s ^ (((st + 1n) * GOLDEN) & MASK64)) & MASK64;
  }

  nextU64(): bigint {
    this.state = (this.state + GOLDEN) & MASK64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
    return z ^ (z >> 31n);
  }

  nextBelow(k: number): number {
    return Number(this.nextU64() % BigInt(k));
  }

  nextFloat(): number {
    return Number(this.nextU64() >> 11n) / 2 ** 53;
  }

  /** n distinct values from [0, total), in draw order. */
  sample(n: number, total: number): number[] {
    if (n > total) throw new Error(`cannot sample ${n} from ${total}`);
    const pool = Array.from({ length: total }, (_, i) => i);
    for (let i = 0; i < n; i++) {
      const j = i + this.nextBelow(total - i);
      [pool[i], pool[j]] = [pool[j], pool[i]];
    }
    return pool.slice(0, n);
  }

  /** n distinct indices without replacement, proportional to weights. */
  weightedSample(n: number, weights: number[]): number[] {
    if (n > weights.length) {
      throw new Error(`cannot sample ${n} from ${weights.length}`);
    }
    const w = weights.slice();
    const picked: number[] = [];
    for (let step = 0; step < n; step++) {
      let total = 0;
      for (const wi of w) total += wi;
      let idx = -1;
      if (total <= 0) {
        const live: number[] = [];
        for (let i = 0; i < w.length; i++) {
          if (!picked.includes(i)) live.push(i);
        }
        idx = live[this.nextBelow(live.length)];
      } else {
        const r = this.nextFloat() * total;
        let acc = 0;
        for (let i = 0; i < w.length; i++) {
          acc += w[i];
          if (r < acc && w[i] > 0) {
            idx = i;
            break;
          }
        }
        if (idx < 0) {
          let bestI = 0;
          for (let i = 1; i < w.length; i++) if (w[i] > w[bestI]) bestI = i;
          idx = bestI;
        }
      }
      picked.push(idx);
      w[idx] = 0;
    }
    return picked;
  }
}
