/**
 * Deterministic 64-bit stream (SplitMix64) so identical requests with
 * identical seeds always render identical images.
 */

const MASK64 = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;

export class SplitMix64 {
  private state: bigint;

  constructor(seed: bigint) {
    this.state = seed & MASK64;
  }

  nextU64(): bigint {
    this.state = (this.state + GOLDEN) & MASK64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
    return z ^ (z >> 31n);
  }

  /** Integer in [0, n); n is small so the modulo bias is negligible. */
  randBelow(n: number): number {
    return Number(this.nextU64() % BigInt(n));
  }

  uniform(): number {
    return Number(this.nextU64() >> 11n) / 2 ** 53;
  }
}

export function fnv1a64(text: string): bigint {
  const bytes = Buffer.from(text, "utf-8");
  let hash = 0xcbf29ce484222325n;
  for (const b of bytes) {
    hash = ((hash ^ BigInt(b)) * 0x100000001b3n) & MASK64;
  }
  return hash;
}

export function mix(...parts: bigint[]): bigint {
  let h = 0n;
  for (const p of parts) {
    h = (h + GOLDEN + (p & MASK64)) & MASK64;
    h = ((h ^ (h >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
    h = ((h ^ (h >> 27n)) * 0x94d049bb133111ebn) & MASK64;
    h = h ^ (h >> 31n);
  }
  return h;
}
