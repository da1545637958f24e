/** Minimal linear / log10 axis scales with deterministic tick generation. */

export interface Scale {
  (value: number): number;
  ticks(): number[];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.ticks = () => {
    // nice step: 1, 2, or 5 times a power of ten
    const raw = span / 6;
    const mag = 10 ** Math.floor(Math.log10(Math.max(raw, 1e-12)));
    const step = [1, 2, 5, 10].map((f) => f * mag).find((s) => s >= raw) ?? mag * 10;
    const ticks: number[] = [];
    for (let t = Math.ceil(d0 / step) * step; t <= d1 + 1e-9; t += step) ticks.push(t);
    return ticks;
  };
  return scale;
}

/** Log10 scale; the domain must be strictly positive. */
export function logScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const span = l1 - l0 || 1;
  const scale = ((value: number) => r0 + ((Math.log10(value) - l0) / span) * (r1 - r0)) as Scale;
  scale.ticks = () => {
    const ticks: number[] = [];
    for (let e = Math.ceil(l0); e <= Math.floor(l1); e++) ticks.push(10 ** e);
    return ticks;
  };
  return scale;
}

/** Fixed-notation formatting that survives round-trips byte-identically. */
export function fmt(value: number): string {
  if (!Number.isFinite(value)) return '0';
  const s = value.toFixed(2);
  return s === '-0.00' ? '0.00' : s;
}
