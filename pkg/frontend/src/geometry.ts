/** Shared plot-layout machinery: axes, log scales, tick generation. */

export interface Margins {
  left: number;
  right: number;
  top: number;
  bottom: number;
}

export interface Frame {
  width: number;
  height: number;
  margins: Margins;
}

export const DEFAULT_FRAME: Frame = {
  width: 640,
  height: 480,
  margins: { left: 70, right: 20, top: 36, bottom: 48 },
};

export interface Scale {
  (value: number): number;
  ticks(): { value: number; label: string }[];
}

export function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const a = Math.log10(lo);
  const b = Math.log10(hi);
  const fn = ((value: number) =>
    outLo + ((Math.log10(value) - a) / (b - a || 1)) * (outHi - outLo)) as Scale;
  fn.ticks = () => {
    const ticks: { value: number; label: string }[] = [];
    for (let e = Math.ceil(a); e <= Math.floor(b); e++) {
      ticks.push({ value: 10 ** e, label: `1e${e}` });
    }
    if (ticks.length <= 1) {
      ticks.length = 0;
      for (const value of [lo, Math.sqrt(lo * hi), hi]) {
        ticks.push({ value, label: value.toPrecision(2) });
      }
    }
    return ticks;
  };
  return fn;
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const fn = ((value: number) =>
    outLo + ((value - lo) / (hi - lo || 1)) * (outHi - outLo)) as Scale;
  fn.ticks = () => {
    const span = hi - lo || 1;
    const step = 10 ** Math.floor(Math.log10(span / 4));
    const mult = span / step > 8 ? 2 : 1;
    const ticks: { value: number; label: string }[] = [];
    const start = Math.ceil(lo / (step * mult)) * step * mult;
    for (let v = start; v <= hi + 1e-12 * span; v += step * mult) {
      ticks.push({ value: v, label: Number(v.toPrecision(3)).toString() });
    }
    return ticks;
  };
  return fn;
}

export function extent(values: number[]): [number, number] {
  const finite = values.filter((v) => Number.isFinite(v) && v > 0);
  if (finite.length === 0) {
    throw new Error("no positive finite values to plot");
  }
  return [Math.min(...finite), Math.max(...finite)];
}

export function pad(lo: number, hi: number, factor = 1.3): [number, number] {
  return [lo / factor, hi * factor];
}

export const PALETTE = [
  "#1f5fb4", "#c23b22", "#2d8a4b", "#8145a8", "#b08a00", "#0d7f8c",
];
