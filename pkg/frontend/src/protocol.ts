/**
 * Wire protocol: canonical text frames exchanged with the session bridge.
 *
 * One message per WebSocket frame. The client sends `hello`, `sample ...`,
 * `snapshot_request`, and `record on|off`; the server answers with
 * `welcome`, `report`, `snapshot`, and `error` frames. Sample payloads are
 * the engine's canonical one-line forms; floats are emitted with
 * JavaScript's shortest round-trip formatting, which the server re-parses
 * to the identical IEEE double.
 */

export interface Rect {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface Slot {
  id: string;
  u: number;
  v: number;
  label: string;
}

export interface Welcome {
  version: string;
  dataset: string;
  rulebook: string;
  map: Rect;
  interaction: Rect;
  anchor: [number, number, number];
  unit: string;
  bins: string[];
  palette: string[];
  slots: Slot[];
}

export interface SeriesSpec {
  regionId: string;
  color: number;
  hidden: boolean;
  column: number;
  values: number[];
}

export interface ChartSpec {
  chartId: string;
  placement: "anchored" | "dynamic";
  subject: string;
  structure: "neighbored" | "stacked";
  vis: string;
  detail: boolean;
  zoom: number;
  pan: [number, number];
  extent: [number, number];
  bins: string[];
  highlights: string[];
  series: SeriesSpec[];
}

export interface BindingDelta {
  op: "bound" | "unbound";
  cube: string;
  region: string;
  color: number;
}

export interface ChartDelta {
  op: "created" | "updated" | "removed";
  chartId: string;
  spec: ChartSpec | null;
}

export interface Report {
  t: number;
  events: string[];
  commands: string[];
  bindings: BindingDelta[];
  charts: ChartDelta[];
  notes: string[];
}

export type ServerMessage =
  | { kind: "welcome"; welcome: Welcome }
  | { kind: "report"; report: Report }
  | { kind: "snapshot"; text: string }
  | { kind: "error"; code: string; message: string };

export const fmt = (x: number): string => {
  if (!Number.isFinite(x)) throw new Error(`non-finite number in sample: ${x}`);
  return String(x);
};

export function poseLine(
  t: number,
  cube: string,
  p: [number, number, number],
  q: [number, number, number, number],
): string {
  return `pose t=${fmt(t)} cube=${cube} p=${p.map(fmt).join(",")} q=${q.map(fmt).join(",")}`;
}

export function touchLine(
  t: number,
  cube: string,
  contact: string,
  face: string,
  uv: [number, number],
  pressure: number,
  phase: "down" | "move" | "up",
): string {
  return (
    `touch t=${fmt(t)} cube=${cube} contact=${contact} face=${face}` +
    ` uv=${uv.map(fmt).join(",")} pressure=${fmt(pressure)} phase=${phase}`
  );
}

export function handLine(
  t: number,
  hand: string,
  palm: [number, number, number],
  shape: "open" | "fist" | "none",
): string {
  return `hand t=${fmt(t)} hand=${hand} palm=${palm.map(fmt).join(",")} shape=${shape}`;
}

export function helloLine(dataset: string, rulebook: string): string {
  return `hello version=1 dataset=${dataset} rulebook=${rulebook}`;
}

function fields(body: string): Map<string, string> {
  const out = new Map<string, string>();
  for (const token of body.split(" ")) {
    const eq = token.indexOf("=");
    if (eq > 0) out.set(token.slice(0, eq), token.slice(eq + 1));
  }
  return out;
}

function need(map: Map<string, string>, key: string): string {
  const value = map.get(key);
  if (value === undefined) throw new Error(`missing field ${key}`);
  return value;
}

function parseRect(token: string): Rect {
  const [x0, y0, x1, y1] = token.split(",").map(Number);
  return { x0, y0, x1, y1 };
}

function parseWelcome(body: string): Welcome {
  const f = fields(body);
  const slots: Slot[] = [];
  const slotsToken = need(f, "slots");
  if (slotsToken.length > 0) {
    for (const item of slotsToken.split(";")) {
      const [id, u, v, label] = item.split(":");
      slots.push({ id, u: Number(u), v: Number(v), label: decodeURIComponent(label ?? id) });
    }
  }
  const anchor = need(f, "anchor").split(",").map(Number) as [number, number, number];
  return {
    version: need(f, "version"),
    dataset: need(f, "dataset"),
    rulebook: need(f, "rulebook"),
    map: parseRect(need(f, "map")),
    interaction: parseRect(need(f, "interaction")),
    anchor,
    unit: decodeURIComponent(need(f, "unit")),
    bins: need(f, "bins").split(","),
    palette: need(f, "palette").split(","),
    slots,
  };
}

export function parseChartSpec(body: string): ChartSpec {
  const f = fields(body);
  const series: SeriesSpec[] = [];
  const seriesToken = need(f, "series");
  if (seriesToken !== "-") {
    for (const item of seriesToken.split("|")) {
      const [regionId, color, hidden, column, values] = item.split(":");
      if (values === undefined) throw new Error(`malformed series item ${item}`);
      series.push({
        regionId,
        color: Number(color),
        hidden: hidden === "true",
        column: Number(column),
        values: values.split(",").map(Number),
      });
    }
  }
  const pan = need(f, "pan").split(",").map(Number) as [number, number];
  const extent = need(f, "extent").split(",").map(Number) as [number, number];
  const placement = need(f, "placement");
  const structure = need(f, "structure");
  if (placement !== "anchored" && placement !== "dynamic") {
    throw new Error(`bad placement ${placement}`);
  }
  if (structure !== "neighbored" && structure !== "stacked") {
    throw new Error(`bad structure ${structure}`);
  }
  const highlightsToken = need(f, "highlights");
  return {
    chartId: need(f, "id"),
    placement,
    subject: need(f, "subject"),
    structure,
    vis: need(f, "vis"),
    detail: need(f, "detail") === "true",
    zoom: Number(need(f, "zoom")),
    pan,
    extent,
    bins: need(f, "bins").split(","),
    highlights: highlightsToken === "-" ? [] : highlightsToken.split(","),
    series,
  };
}

function parseReportItem(item: string, report: Report): void {
  const head = item.split(" ", 1)[0];
  if (head === "event") {
    report.events.push(item);
  } else if (head === "command") {
    report.commands.push(item);
  } else if (head === "note") {
    report.notes.push(item.slice(5));
  } else if (head === "binding-delta") {
    const f = fields(item.slice(head.length + 1));
    report.bindings.push({
      op: need(f, "op") as BindingDelta["op"],
      cube: need(f, "cube"),
      region: need(f, "region"),
      color: Number(need(f, "color")),
    });
  } else if (head === "chart-delta") {
    const body = item.slice(head.length + 1);
    const f = fields(body);
    const op = need(f, "op") as ChartDelta["op"];
    if (op === "removed") {
      report.charts.push({ op, chartId: need(f, "id"), spec: null });
    } else {
      report.charts.push({ op, chartId: need(f, "id"), spec: parseChartSpec(body) });
    }
  }
}

function parseReport(body: string): Report {
  const space = body.indexOf(" ");
  const tToken = space < 0 ? body : body.slice(0, space);
  const report: Report = {
    t: Number(tToken.split("=")[1]),
    events: [],
    commands: [],
    bindings: [],
    charts: [],
    notes: [],
  };
  const itemsIdx = body.indexOf("items=");
  if (itemsIdx >= 0) {
    const items = body.slice(itemsIdx + 6);
    if (items.length > 0) {
      for (const item of items.split(";")) parseReportItem(item, report);
    }
  }
  return report;
}

export function parseServerMessage(frame: string): ServerMessage {
  const space = frame.indexOf(" ");
  const head = space < 0 ? frame : frame.slice(0, space);
  const body = space < 0 ? "" : frame.slice(space + 1);
  if (head === "welcome") return { kind: "welcome", welcome: parseWelcome(body) };
  if (head === "report") return { kind: "report", report: parseReport(body) };
  if (head === "snapshot") {
    const data = body.startsWith("data=") ? body.slice(5) : "";
    return { kind: "snapshot", text: decodeBase64(data) };
  }
  if (head === "error") {
    const f = fields(body);
    const quoted = body.match(/message="([^"]*)"/);
    return {
      kind: "error",
      code: f.get("code") ?? "unknown",
      message: quoted ? quoted[1] : body,
    };
  }
  throw new Error(`unknown server frame ${head}`);
}

function decodeBase64(data: string): string {
  if (typeof atob === "function") {
    const bytes = atob(data);
    const arr = new Uint8Array(bytes.length);
    for (let i = 0; i < bytes.length; i++) arr[i] = bytes.charCodeAt(i);
    return new TextDecoder().decode(arr);
  }
  return Buffer.from(data, "base64").toString("utf-8");
}
