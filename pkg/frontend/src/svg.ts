/** Tiny SVG document builder; enough for line charts with labels. */

export interface LineStyle {
  color: string;
  dashed?: boolean;
  width?: number;
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}" ` +
      `font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, style: LineStyle): void {
    this.parts.push(
      `<line x1="${r(x1)}" y1="${r(y1)}" x2="${r(x2)}" y2="${r(y2)}" ` +
      `stroke="${style.color}" stroke-width="${style.width ?? 1}"` +
      (style.dashed ? ' stroke-dasharray="6 4"' : "") + "/>",
    );
  }

  polyline(points: Array<[number, number]>, style: LineStyle): void {
    const attr = points.map(([x, y]) => `${r(x)},${r(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${attr}" fill="none" stroke="${style.color}" ` +
      `stroke-width="${style.width ?? 1.6}"` +
      (style.dashed ? ' stroke-dasharray="6 4"' : "") + "/>",
    );
  }

  marker(x: number, y: number, color: string): void {
    this.parts.push(`<circle cx="${r(x)}" cy="${r(y)}" r="3" fill="${color}"/>`);
  }

  text(x: number, y: number, content: string, opts: {
    size?: number; anchor?: string; color?: string; rotate?: number;
  } = {}): void {
    const transform = opts.rotate
      ? ` transform="rotate(${opts.rotate} ${r(x)} ${r(y)})"` : "";
    this.parts.push(
      `<text x="${r(x)}" y="${r(y)}" font-size="${opts.size ?? 12}" ` +
      `fill="${opts.color ?? "#222"}" text-anchor="${opts.anchor ?? "start"}"` +
      `${transform}>${escapeXml(content)}</text>`,
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function r(v: number): string {
  return (Math.round(v * 100) / 100).toString();
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
