import * as echarts from "echarts";
import type { EChartsOption, SeriesOption } from "echarts";
import type { CcdfCurves, RegionRow } from "./csv.js";

const WIDTH = 840;
const HEIGHT = 620;
const MARKER_SYMBOLS = ["diamond", "square", "triangle", "circle"];

/** Replace the renderer's global instance counters with stable tokens so the
 * SVG is a pure function of the chart options. */
function canonicalize(svg: string): string {
  const seen = new Map<string, string>();
  return svg.replace(/zr\d+-(cls|c)-?(\d+)/g, (tok, kind) => {
    if (!seen.has(tok)) {
      seen.set(tok, `zr-${kind}-${seen.size}`);
    }
    return seen.get(tok)!;
  });
}

function renderOption(option: EChartsOption): string {
  const chart = echarts.init(null, undefined, {
    renderer: "svg",
    ssr: true,
    width: WIDTH,
    height: HEIGHT,
  });
  chart.setOption({ animation: false, ...option });
  const svg = chart.renderToSVGString();
  chart.dispose();
  return canonicalize(svg);
}

/** Distortion region: boundary rows as a curve, other modes as markers. */
export function renderRegion(rows: RegionRow[]): string {
  const boundary = rows
    .filter((r) => r.mode === "boundary")
    .sort((a, b) => a.D1 - b.D1)
    .map((r) => [r.D1, r.D2]);
  const markerModes = [...new Set(rows.filter((r) => r.mode !== "boundary").map((r) => r.mode))];
  const series: SeriesOption[] = [];
  if (boundary.length > 0) {
    series.push({
      name: "achievable boundary",
      type: "line",
      data: boundary,
      showSymbol: false,
      lineStyle: { width: 2 },
    });
  }
  markerModes.forEach((mode, i) => {
    series.push({
      name: mode,
      type: "scatter",
      symbol: MARKER_SYMBOLS[i % MARKER_SYMBOLS.length],
      symbolSize: 14,
      data: rows.filter((r) => r.mode === mode).map((r) => [r.D1, r.D2]),
    });
  });
  return renderOption({
    title: { text: "Distortion region" },
    legend: { top: 28 },
    xAxis: { type: "value", name: "D1" },
    yAxis: { type: "value", name: "D2" },
    series,
  });
}

/** CCDF curves Pr(Delta > D), one per source, log probability axis. */
export function renderCcdf(curves: CcdfCurves, logScale = true): string {
  const series: SeriesOption[] = [];
  for (const [source, pts] of [...curves.entries()].sort()) {
    series.push({
      name: `source ${source}`,
      type: "line",
      // a log axis cannot hold zero-probability points
      data: pts.filter((p) => !logScale || p.prob > 0).map((p) => [p.D, p.prob]),
      showSymbol: false,
      lineStyle: { width: 2 },
    });
  }
  return renderOption({
    title: { text: "Pr(block distortion > D)" },
    legend: { top: 28 },
    xAxis: { type: "value", name: "D" },
    yAxis: logScale
      ? { type: "log", name: "probability", min: "dataMin" }
      : { type: "value", name: "probability" },
    series,
  });
}
