/**
 * Client-side session mirror: slots, bindings, charts, and a status banner.
 *
 * The scene renders only what the server said. Chart specs arrive fully
 * formed in report frames; a frame that fails to parse is dropped with a
 * console diagnostic and the previous rendering is kept.
 */

import {
  ChartSpec,
  Report,
  ServerMessage,
  Welcome,
  parseServerMessage,
} from "./protocol.js";

export interface SceneState {
  welcome: Welcome | null;
  charts: Map<string, ChartSpec>;
  slotColors: Map<string, number>; // region id -> palette index
  boundCubes: Map<string, string>; // cube id -> region id
  log: string[];
  banner: string;
  connected: boolean;
  lastSnapshot: string | null;
}

export function newScene(): SceneState {
  return {
    welcome: null,
    charts: new Map(),
    slotColors: new Map(),
    boundCubes: new Map(),
    log: [],
    banner: "connecting...",
    connected: false,
    lastSnapshot: null,
  };
}

function applyReport(scene: SceneState, report: Report): void {
  for (const line of report.events) scene.log.push(line);
  for (const line of report.commands) scene.log.push(line);
  for (const note of report.notes) scene.log.push(`note ${note}`);
  for (const delta of report.bindings) {
    if (delta.op === "bound") {
      scene.slotColors.set(delta.region, delta.color);
      scene.boundCubes.set(delta.cube, delta.region);
      scene.log.push(`bound ${delta.cube} -> ${delta.region}`);
    } else {
      scene.slotColors.delete(delta.region);
      scene.boundCubes.delete(delta.cube);
      scene.log.push(`unbound ${delta.cube}`);
    }
  }
  for (const delta of report.charts) {
    if (delta.op === "removed") {
      scene.charts.delete(delta.chartId);
    } else if (delta.spec !== null) {
      scene.charts.set(delta.chartId, delta.spec);
    }
  }
  if (scene.log.length > 200) scene.log.splice(0, scene.log.length - 200);
}

/** Apply one raw server frame; malformed frames never corrupt the scene. */
export function applyFrame(scene: SceneState, frame: string): ServerMessage | null {
  let message: ServerMessage;
  try {
    message = parseServerMessage(frame);
  } catch (err) {
    console.error("dropping malformed server frame:", err, frame);
    return null;
  }
  switch (message.kind) {
    case "welcome":
      scene.welcome = message.welcome;
      scene.banner = `session: ${message.welcome.dataset} / ${message.welcome.rulebook}`;
      scene.connected = true;
      break;
    case "report":
      applyReport(scene, message.report);
      break;
    case "snapshot":
      scene.lastSnapshot = message.text;
      break;
    case "error":
      scene.banner = `server error [${message.code}]: ${message.message}`;
      scene.log.push(scene.banner);
      break;
  }
  return message;
}

export function markDisconnected(scene: SceneState, reason: string): void {
  scene.connected = false;
  scene.banner = `disconnected: ${reason}`;
}

/** Center of a slot in table coordinates. */
export function slotCenter(welcome: Welcome, regionId: string): [number, number] {
  const slot = welcome.slots.find((s) => s.id === regionId);
  if (slot === undefined) throw new Error(`unknown slot ${regionId}`);
  return [
    welcome.map.x0 + slot.u * (welcome.map.x1 - welcome.map.x0),
    welcome.map.y0 + slot.v * (welcome.map.y1 - welcome.map.y0),
  ];
}
