"""SplitMix64: a tiny 64-bit generator with a fixed, portable definition.

Each call advances a 64-bit state by the golden-ratio increment
0x9E3779B97F4A7C15 and returns the state passed through the standard
SplitMix64 finalizer (xor-shift 30 / multiply 0xBF58476D1CE4E5B9 /
xor-shift 27 / multiply 0x94D049BB133111EB / xor-shift 31, all mod 2^64).
Doubles in [0, 1) take the top 53 bits: ``(z >> 11) * 2**-53``. The same
seed gives the same stream on any platform and in any language.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0 ** -53)
