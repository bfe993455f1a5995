/** Regenerate the xy-path plot from one or two telemetry CSV exports.
 *
 * Usage: node dist/examples/plot_fig1.js out.svg cartesian.csv [joint.csv]
 * The CSVs follow the stable telemetry schema (time, q, dq, tau, ee_*, m*).
 */

import * as fs from "node:fs";

import { isMain } from "./config.js";

export interface XY {
  xs: number[];
  ys: number[];
}

export function readPath(csvPath: string): XY {
  const lines = fs.readFileSync(csvPath, "utf-8").trim().split("\n");
  if (lines.length < 2) throw new Error(`empty log: ${csvPath}`);
  const header = lines[0].split(",");
  const ix = header.indexOf("ee_x");
  const iy = header.indexOf("ee_y");
  if (ix < 0 || iy < 0) throw new Error(`not a telemetry csv: ${csvPath}`);
  const xs: number[] = [];
  const ys: number[] = [];
  for (const line of lines.slice(1)) {
    const cols = line.split(",");
    xs.push(Number(cols[ix]));
    ys.push(Number(cols[iy]));
  }
  return { xs, ys };
}

export function writeSvg(outPath: string, series: Array<[string, XY, string]>): void {
  const width = 640;
  const height = 480;
  const margin = 50;
  const all = series.flatMap(([, p]) => p.xs.map((x, i) => [x, p.ys[i]] as const));
  const xLo = Math.min(...all.map(([x]) => x));
  const xHi = Math.max(...all.map(([x]) => x));
  const yLo = Math.min(...all.map(([, y]) => y));
  const yHi = Math.max(...all.map(([, y]) => y));
  const sx = (x: number) => margin + ((x - xLo) / (xHi - xLo || 1)) * (width - 2 * margin);
  const sy = (y: number) => height - margin - ((y - yLo) / (yHi - yLo || 1)) * (height - 2 * margin);
  const parts = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    `<text x="${width / 2}" y="24" text-anchor="middle" font-size="15">logged EE path, xy projection</text>`,
  ];
  series.forEach(([label, p, color], k) => {
    const pts = p.xs.map((x, i) => `${sx(x).toFixed(1)},${sy(p.ys[i]).toFixed(1)}`).join(" ");
    parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    parts.push(`<text x="${margin}" y="${44 + 16 * k}" font-size="12" fill="${color}">${label}</text>`);
  });
  parts.push("</svg>");
  fs.writeFileSync(outPath, parts.join("\n"));
}

if (isMain(import.meta.url)) {
  const [out, cartCsv, jointCsv] = process.argv.slice(2);
  if (!out || !cartCsv) {
    console.error("usage: plot_fig1 out.svg cartesian.csv [joint.csv]");
    process.exit(2);
  }
  const series: Array<[string, XY, string]> = [["cartesian motion", readPath(cartCsv), "#1f77b4"]];
  if (jointCsv) series.push(["joint-space motion", readPath(jointCsv), "#d62728"]);
  writeSvg(out, series);
  console.log(`wrote ${out}`);
}
