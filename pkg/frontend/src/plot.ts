/** Log-log convergence plots and effectivity-index plots from study CSVs.
 *
 * Multiple CSVs overlay with the first drawn solid and later ones dashed
 * (uniform vs adaptive comparisons).  Reference-slope guides anchor at
 * the last point of the first series.
 */

import { readFileSync, writeFileSync } from "node:fs";
import * as path from "node:path";

import { column, meshSizeColumn, parseStudy, SchemaError, Study } from "./csv";
import {
  DEFAULT_FRAME, extent, Frame, linearScale, logScale, pad, PALETTE, Scale,
} from "./geometry";
import { Canvas } from "./raster";
import { SvgDoc } from "./svg";

export interface PlotSpec {
  /** one or more study CSVs; the first sets the reference styling */
  csvPaths: string[];
  /** error columns to plot (must exist in the schema) */
  columns: string[];
  /** x-axis: "mesh" (h or heff per study kind) or "dofs" */
  xAxis?: "mesh" | "dofs";
  /** reference slopes to overlay, e.g. [1, 2] */
  slopes?: number[];
  /** output image path; .svg always written, .png alongside if pngPath set */
  outPath: string;
  pngPath?: string;
  title?: string;
}

interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
  dashed: boolean;
}

export function loadStudies(paths: string[]): Study[] {
  return paths.map((p) => parseStudy(readFileSync(p, "ascii")));
}

function gatherSeries(studies: Study[], spec: PlotSpec): Series[] {
  const series: Series[] = [];
  studies.forEach((study, si) => {
    const xcol = spec.xAxis === "dofs" ? "dofs" : meshSizeColumn(study);
    const xs = column(study, xcol);
    spec.columns.forEach((name, ci) => {
      const ys = column(study, name);
      const keep = xs.map((x, i) => [x, ys[i]] as [number, number])
        .filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y) && x > 0 && y > 0);
      if (keep.length === 0) {
        throw new SchemaError(`column "${name}" has no plottable values`);
      }
      series.push({
        label: studies.length > 1
          ? `${name} (${study.kind})` : name,
        x: keep.map(([x]) => x),
        y: keep.map(([, y]) => y),
        color: PALETTE[ci % PALETTE.length],
        dashed: si > 0,
      });
    });
  });
  return series;
}

function drawChart(
  series: Series[],
  spec: PlotSpec,
  frame: Frame,
  yScaleKind: "log" | "linear",
): { svg: SvgDoc; canvas: Canvas } {
  const { width, height, margins } = frame;
  const plotW: [number, number] = [margins.left, width - margins.right];
  const plotH: [number, number] = [height - margins.bottom, margins.top];

  const [xloRaw, xhiRaw] = pad(...extent(series.flatMap((s) => s.x)));
  const allY = series.flatMap((s) => s.y);
  const [yloRaw, yhiRaw] = pad(...extent(allY));
  const xscale = logScale(xloRaw, xhiRaw, ...plotW);
  const yscale: Scale = yScaleKind === "log"
    ? logScale(yloRaw, yhiRaw, ...plotH)
    : linearScale(0, yhiRaw, ...plotH);

  const svg = new SvgDoc(width, height);
  const canvas = new Canvas(width, height);
  const axis = { color: "#444", width: 1 };

  // axes box and ticks
  svg.line(plotW[0], plotH[0], plotW[1], plotH[0], axis);
  svg.line(plotW[0], plotH[0], plotW[0], plotH[1], axis);
  canvas.line(plotW[0], plotH[0], plotW[1], plotH[0], [68, 68, 68]);
  canvas.line(plotW[0], plotH[0], plotW[0], plotH[1], [68, 68, 68]);
  for (const t of xscale.ticks()) {
    const x = xscale(t.value);
    svg.line(x, plotH[0], x, plotH[0] + 5, axis);
    svg.text(x, plotH[0] + 18, t.label, { anchor: "middle", size: 11 });
    canvas.line(x, plotH[0], x, plotH[0] + 5, [68, 68, 68]);
    canvas.text(x - 3 * t.label.length, plotH[0] + 16, t.label);
  }
  for (const t of yscale.ticks()) {
    const y = yscale(t.value);
    svg.line(plotW[0] - 5, y, plotW[0], y, axis);
    svg.text(plotW[0] - 8, y + 4, t.label, { anchor: "end", size: 11 });
    canvas.line(plotW[0] - 5, y, plotW[0], y, [68, 68, 68]);
    canvas.text(plotW[0] - 8 - 6 * t.label.length, y + 4, t.label);
  }
  const xLabel = spec.xAxis === "dofs" ? "dofs" : "h";
  svg.text((plotW[0] + plotW[1]) / 2, height - 10, xLabel,
           { anchor: "middle", size: 13 });
  canvas.text((plotW[0] + plotW[1]) / 2 - 3 * xLabel.length, height - 8, xLabel);
  if (spec.title) {
    svg.text((plotW[0] + plotW[1]) / 2, 20, spec.title,
             { anchor: "middle", size: 14 });
    canvas.text(plotW[0], 18, spec.title);
  }

  // series
  series.forEach((s) => {
    const points = s.x.map((x, i) =>
      [xscale(x), yscale(s.y[i])] as [number, number]);
    const rgb = hexToRgb(s.color);
    svg.polyline(points, { color: s.color, dashed: s.dashed });
    for (let i = 1; i < points.length; i++) {
      canvas.line(points[i - 1][0], points[i - 1][1],
                  points[i][0], points[i][1], rgb, 2, s.dashed);
    }
    points.forEach(([x, y]) => {
      svg.marker(x, y, s.color);
      canvas.line(x - 1, y, x + 1, y, rgb, 3);
    });
  });

  // reference slopes, anchored at the last point of the first series
  if (yScaleKind === "log" && spec.slopes && spec.slopes.length && series.length) {
    const ref = series[0];
    const xEnd = ref.x[ref.x.length - 1];
    const yEnd = ref.y[ref.y.length - 1];
    const xStart = ref.x[0];
    for (const slope of spec.slopes) {
      const yStart = yEnd * (xStart / xEnd) ** slope;
      const pts: Array<[number, number]> = [
        [xscale(xStart), yscale(yStart * 1.5)],
        [xscale(xEnd), yscale(yEnd * 1.5)],
      ];
      svg.polyline(pts, { color: "#999", dashed: true, width: 1 });
      svg.text(pts[1][0] - 4, pts[1][1] - 6, `slope ${slope}`,
               { anchor: "end", size: 11, color: "#777" });
      canvas.line(pts[0][0], pts[0][1], pts[1][0], pts[1][1], [150, 150, 150], 1, true);
      canvas.text(pts[1][0] - 60, pts[1][1] - 6, `slope ${slope}`, [120, 120, 120]);
    }
  }

  // legend
  let ly = margins.top + 6;
  series.forEach((s) => {
    const rgb = hexToRgb(s.color);
    const lx = plotW[1] - 170;
    svg.line(lx, ly, lx + 24, ly, { color: s.color, dashed: s.dashed, width: 2 });
    svg.text(lx + 30, ly + 4, s.label, { size: 11 });
    canvas.line(lx, ly, lx + 24, ly, rgb, 2, s.dashed);
    canvas.text(lx + 30, ly + 4, s.label);
    ly += 16;
  });

  return { svg, canvas };
}

function hexToRgb(hex: string): [number, number, number] {
  const v = parseInt(hex.slice(1), 16);
  return [(v >> 16) & 255, (v >> 8) & 255, v & 255];
}

/** Log-log error plot with reference slopes; returns written paths. */
export function plotConvergence(spec: PlotSpec): string[] {
  if (!spec.columns.length) {
    throw new SchemaError("no columns requested");
  }
  const studies = loadStudies(spec.csvPaths);
  const series = gatherSeries(studies, spec);
  const { svg, canvas } = drawChart(series, spec, DEFAULT_FRAME, "log");
  return writeOutputs(spec, svg, canvas);
}

/** Effectivity indexes (linear y) against DOF count (log x). */
export function plotEffectivity(spec: PlotSpec): string[] {
  const columns = spec.columns.length ? spec.columns : ["eff1", "eff2"];
  const studies = loadStudies(spec.csvPaths);
  const series = gatherSeries(studies, { ...spec, columns, xAxis: "dofs" });
  const { svg, canvas } = drawChart(
    series, { ...spec, columns, xAxis: "dofs" }, DEFAULT_FRAME, "linear");
  return writeOutputs(spec, svg, canvas);
}

function writeOutputs(spec: PlotSpec, svg: SvgDoc, canvas: Canvas): string[] {
  const written: string[] = [];
  const svgPath = spec.outPath.endsWith(".png")
    ? spec.outPath.slice(0, -4) + ".svg" : spec.outPath;
  writeFileSync(svgPath, svg.render());
  written.push(svgPath);
  const pngPath = spec.pngPath
    ?? (spec.outPath.endsWith(".png") ? spec.outPath : undefined);
  if (pngPath) {
    writeFileSync(pngPath, canvas.png());
    written.push(pngPath);
  }
  return written.map((p) => path.resolve(p));
}
