"""Tiny deterministic RNG reproducible across language boundaries.

The sandbox worker ships the same generator (splitmix64), so a guest
heuristic and its native twin can draw identical index sequences and score
bit-identically. Not a statistical-quality generator for simulation work;
channel generation uses numpy's Philox instead.

Definitions (all arithmetic mod 2**64):
  state0(seed, stream) = seed XOR ((stream + 1) * 0x9E3779B97F4A7C15)
  next(): state += 0x9E3779B97F4A7C15; z = state;
          z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
          z = (z ^ (z >> 27)) * 0x94D049BB133111EB
          return z ^ (z >> 31)
  next_below(k)  = next() % k            (modulo bias accepted by contract)
  next_float()   = (next() >> 11) / 2**53
  sample(n, N)   = first n entries of a partial Fisher-Yates shuffle of
                   [0..N-1] using next_below
"""

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1


class SplitMix64:
    """splitmix64 stream keyed by (seed, stream)."""

    def __init__(self, seed: int, stream: int = 0):
        self.state = (seed ^ (((stream + 1) * GOLDEN) & MASK64)) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_below(self, k: int) -> int:
        return self.next_u64() % k

    def next_float(self) -> float:
        return (self.next_u64() >> 11) / float(1 << 53)

    def sample(self, n: int, total: int) -> list[int]:
        """n distinct values from [0, total), order as drawn."""
        if n > total:
            raise ValueError(f"cannot sample {n} from {total}")
        pool = list(range(total))
        for i in range(n):
            j = i + self.next_below(total - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:n]

    def weighted_sample(self, n: int, weights: list[float]) -> list[int]:
        """n distinct indices drawn without replacement, proportional to weights."""
        if n > len(weights):
            raise ValueError(f"cannot sample {n} from {len(weights)}")
        w = list(weights)
        picked = []
        for _ in range(n):
            total = sum(w)
            if total <= 0.0:
                live = [i for i in range(len(w)) if i not in picked]
                idx = live[self.next_below(len(live))]
            else:
                r = self.next_float() * total
                acc = 0.0
                idx = -1
                for i, wi in enumerate(w):
                    acc += wi
                    if r < acc and wi > 0.0:
                        idx = i
                        break
                if idx < 0:
                    idx = max(range(len(w)), key=lambda i: w[i])
            picked.append(idx)
            w[idx] = 0.0
        return picked
