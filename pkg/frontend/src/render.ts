/**
 * Canvas rendering: a 2.5D tabletop (top-down with a slight tilt) plus the
 * charts the server described. Every pixel of a chart traces to a field of
 * a server ChartSpec; the client computes nothing but screen coordinates.
 */

import { EDGE, InputSynth } from "./input.js";
import { ChartSpec, Rect } from "./protocol.js";
import { SceneState, slotCenter } from "./scene.js";

const SCALE = 760; // pixels per meter
const ORIGIN_X = 60;
const ORIGIN_Y = 560;
const TILT = 0.88; // y foreshortening
const LIFT = 0.9; // how far z moves things up the screen

export function project(x: number, y: number, z: number): [number, number] {
  return [ORIGIN_X + x * SCALE, ORIGIN_Y - y * SCALE * TILT - z * SCALE * LIFT];
}

function drawRegion(ctx: CanvasRenderingContext2D, rect: Rect, fill: string, label: string): void {
  const [x0, y0] = project(rect.x0, rect.y1, 0);
  const [x1, y1] = project(rect.x1, rect.y0, 0);
  ctx.fillStyle = fill;
  ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
  ctx.fillStyle = "#667";
  ctx.font = "12px sans-serif";
  ctx.fillText(label, x0 + 6, y1 - 6);
}

const CSS_COLORS: Record<string, string> = {
  yellow: "#e8c41a",
  purple: "#8e5bd0",
  teal: "#2aa198",
  orange: "#e07a28",
  blue: "#4078c0",
  red: "#d04040",
  green: "#4f9e43",
  pink: "#d668a8",
};

function paletteColor(scene: SceneState, index: number): string {
  const name = scene.welcome?.palette[index] ?? "gray";
  return CSS_COLORS[name] ?? name;
}

function drawSlots(ctx: CanvasRenderingContext2D, scene: SceneState): void {
  const welcome = scene.welcome!;
  for (const slot of welcome.slots) {
    const [cx, cy] = slotCenter(welcome, slot.id);
    const [sx, sy] = project(cx, cy, 0);
    const half = (EDGE / 2) * SCALE;
    ctx.setLineDash([4, 3]);
    const color = scene.slotColors.get(slot.id);
    ctx.strokeStyle = color === undefined ? "#99a" : paletteColor(scene, color);
    ctx.lineWidth = color === undefined ? 1 : 2.5;
    ctx.strokeRect(sx - half, sy - half * TILT, half * 2, half * 2 * TILT);
    ctx.setLineDash([]);
    ctx.fillStyle = "#778";
    ctx.font = "10px sans-serif";
    ctx.fillText(slot.label, sx - half, sy + half + 10);
  }
}

function drawCubes(ctx: CanvasRenderingContext2D, scene: SceneState, synth: InputSynth): void {
  const cubes = [...synth.cubes.values()].sort((a, b) => a.y - b.y || a.z - b.z);
  for (const cube of cubes) {
    const region = scene.boundCubes.get(cube.id);
    const colorIdx = region !== undefined ? scene.slotColors.get(region) : undefined;
    const fill = colorIdx !== undefined ? paletteColor(scene, colorIdx) : "#b9bec8";
    const half = (EDGE / 2) * SCALE;
    const [sx, sy] = project(cube.x, cube.y, cube.z - EDGE / 2);
    const h = EDGE * SCALE * LIFT;
    ctx.fillStyle = fill;
    ctx.fillRect(sx - half, sy - h, half * 2, h);
    ctx.fillStyle = shade(fill, 1.25);
    ctx.fillRect(sx - half, sy - h - half * 0.5 * TILT, half * 2, half * 0.5 * TILT);
    ctx.strokeStyle = "#444";
    ctx.lineWidth = 1;
    ctx.strokeRect(sx - half, sy - h, half * 2, h);
    ctx.fillStyle = "#223";
    ctx.font = "10px sans-serif";
    ctx.fillText(cube.id, sx - 3, sy - h / 2);
  }
}

function shade(color: string, factor: number): string {
  if (!color.startsWith("#") || color.length !== 7) return color;
  const lift = (i: number) =>
    Math.min(255, Math.round(parseInt(color.slice(i, i + 2), 16) * factor));
  return `rgb(${lift(1)},${lift(3)},${lift(5)})`;
}

function chartOrigin(scene: SceneState, synth: InputSynth, spec: ChartSpec): [number, number, number] {
  const welcome = scene.welcome!;
  if (spec.placement === "anchored") return welcome.anchor;
  // Dynamic: over the midpoint of the subject cubes' top surfaces.
  const members = spec.subject.split("+");
  let mx = 0;
  let my = 0;
  let topZ = 0;
  let found = 0;
  for (const id of members) {
    const cube = synth.cubes.get(id);
    if (cube === undefined) continue;
    mx += cube.x;
    my += cube.y;
    topZ = Math.max(topZ, cube.z + EDGE / 2);
    found += 1;
  }
  if (found === 0) return welcome.anchor;
  return [mx / found, my / found, topZ + 0.01];
}

function drawChart(
  ctx: CanvasRenderingContext2D,
  scene: SceneState,
  synth: InputSynth,
  spec: ChartSpec,
): void {
  const [ox, oy, oz] = chartOrigin(scene, synth, spec);
  const [baseX, baseY] = project(ox, oy, oz);
  const visible = spec.series.filter((s) => !s.hidden);
  if (visible.length === 0) return;
  const columns = [...new Set(visible.map((s) => s.column))].sort((a, b) => a - b);
  const nBins = spec.bins.length;
  const chartW = Math.max(90, nBins * columns.length * 14) * Math.min(spec.zoom, 2);
  const chartH = 80 * Math.min(spec.zoom, 2);
  const left = baseX - chartW / 2 + spec.pan[0] * 40;
  const bottom = baseY - 8 + spec.pan[1] * 40;
  const peak = spec.extent[1] > 0 ? spec.extent[1] : 1;
  const binW = chartW / nBins;

  ctx.fillStyle = "rgba(20,22,30,0.55)";
  ctx.fillRect(left - 6, bottom - chartH - 16, chartW + 12, chartH + 24);

  for (let b = 0; b < nBins; b++) {
    if (spec.vis === "line") {
      for (const series of visible) {
        ctx.strokeStyle = paletteColor(scene, series.color);
        ctx.lineWidth = 2;
        ctx.beginPath();
        series.values.forEach((v, i) => {
          const px = left + (i + 0.5) * binW;
          const py = bottom - (v / peak) * chartH;
          if (i === 0) ctx.moveTo(px, py);
          else ctx.lineTo(px, py);
        });
        ctx.stroke();
      }
      break; // one pass draws every bin
    }
    const slotW = binW / (columns.length + 0.5);
    columns.forEach((column, ci) => {
      let stackBase = bottom;
      for (const series of visible) {
        if (series.column !== column) continue;
        const v = series.values[b] ?? 0;
        const h = (v / peak) * chartH;
        const px = left + b * binW + ci * slotW + slotW * 0.15;
        ctx.fillStyle = paletteColor(scene, series.color);
        ctx.fillRect(px, stackBase - h, slotW * 0.7, h);
        const marker = `${series.regionId}@${spec.bins[b]}`;
        if (spec.highlights.includes(marker)) {
          ctx.strokeStyle = "#fff";
          ctx.lineWidth = 2;
          ctx.strokeRect(px - 1, stackBase - h - 1, slotW * 0.7 + 2, h + 2);
        }
        if (spec.structure === "stacked") stackBase -= h;
      }
    });
  }
  ctx.fillStyle = "#cfd3e0";
  ctx.font = "10px sans-serif";
  const title = spec.placement === "anchored" ? "anchored" : spec.subject;
  ctx.fillText(`${title} [${spec.vis}${spec.detail ? ", detail" : ""}]`, left, bottom - chartH - 4);
  ctx.fillText(spec.bins[0], left, bottom + 10);
  ctx.fillText(spec.bins[nBins - 1], left + chartW - 30, bottom + 10);
}

export function render(
  ctx: CanvasRenderingContext2D,
  scene: SceneState,
  synth: InputSynth,
  width: number,
  height: number,
): void {
  ctx.fillStyle = "#14161e";
  ctx.fillRect(0, 0, width, height);
  if (scene.welcome === null) {
    ctx.fillStyle = "#ccc";
    ctx.font = "16px sans-serif";
    ctx.fillText(scene.banner, 40, 60);
    return;
  }
  drawRegion(ctx, scene.welcome.map, "#1d2433", "map region");
  drawRegion(ctx, scene.welcome.interaction, "#232330", "interaction region");
  drawSlots(ctx, scene);
  drawCubes(ctx, scene, synth);
  for (const id of [...scene.charts.keys()].sort()) {
    drawChart(ctx, scene, synth, scene.charts.get(id)!);
  }
  ctx.fillStyle = scene.connected ? "#9fd29f" : "#e89d9d";
  ctx.font = "13px sans-serif";
  ctx.fillText(scene.banner, 16, 20);
}
