/**
 * Browser entry point: wires the connection, the input synthesizer, the
 * scene mirror, and the canvas renderer together.
 *
 * Modes (keyboard): 1 slide, 2 carry (lift while dragging), 3 touch,
 * 4 open-palm hover, 5 fist hover, 6 cover. S shakes and R rotates the
 * cube under the cursor. Samples stream only while connected.
 */

import { Connection } from "./connection.js";
import { InputSynth, Mode } from "./input.js";
import { helloLine } from "./protocol.js";
import { applyFrame, markDisconnected, newScene } from "./scene.js";
import { render, project } from "./render.js";

const params = new URLSearchParams(window.location.search);
const BRIDGE_URL = params.get("bridge") ?? "ws://localhost:8765";
const DATASET = params.get("dataset") ?? "health";
const RULEBOOK = params.get("rulebook") ?? "default";
const CUBES = ["A", "B", "C", "D", "E", "F", "G", "H"];

const canvas = document.getElementById("table") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const modeLabel = document.getElementById("mode")!;
const logPane = document.getElementById("log")!;

const scene = newScene();
let epoch = performance.now();
const now = () => (performance.now() - epoch) / 1000;

let synth = makeSynth();
let registered = false;
let recording = false;

function makeSynth(): InputSynth {
  return new InputSynth((line) => {
    connection.send("sample " + line);
  });
}

const connection = new Connection(BRIDGE_URL, {
  onOpen: () => {
    scene.banner = "handshaking...";
    connection.send(helloLine(DATASET, RULEBOOK));
  },
  onFrame: (frame) => {
    const message = applyFrame(scene, frame);
    if (message?.kind === "welcome" && !registered) {
      epoch = performance.now();
      synth = makeSynth();
      synth.registerCubes(now(), CUBES);
      registered = true;
    }
    if (message?.kind === "snapshot") {
      console.log(message.text);
    }
  },
  onClose: (reason) => {
    markDisconnected(scene, reason);
    registered = false; // scene freezes; a fresh session needs fresh cubes
  },
});

function tableCoords(event: MouseEvent): [number, number] {
  const rect = canvas.getBoundingClientRect();
  const px = event.clientX - rect.left;
  const py = event.clientY - rect.top;
  // Invert the projection at z=0.
  const [ox, oy] = project(0, 0, 0);
  const [ux] = project(1, 0, 0);
  const [, uy] = project(0, 1, 0);
  return [(px - ox) / (ux - ox), (py - oy) / (uy - oy)];
}

canvas.addEventListener("pointerdown", (e) => {
  if (!scene.connected || !registered) return;
  const [x, y] = tableCoords(e);
  synth.pointerDown(now(), x, y);
});
canvas.addEventListener("pointermove", (e) => {
  if (!scene.connected || !registered) return;
  const [x, y] = tableCoords(e);
  synth.pointerMove(now(), x, y);
});
canvas.addEventListener("pointerup", () => {
  if (!scene.connected || !registered) return;
  synth.pointerUp(now());
});

const MODES: Record<string, Mode> = {
  "1": "slide",
  "2": "carry",
  "3": "touch",
  "4": "hover-open",
  "5": "hover-fist",
  "6": "cover",
};

window.addEventListener("keydown", (e) => {
  if (!scene.connected || !registered) return;
  const mode = MODES[e.key];
  if (mode !== undefined) {
    synth.setMode(now(), mode);
    modeLabel.textContent = `mode: ${mode}`;
  } else if (e.key === "s" || e.key === "S") {
    synth.shake(now());
  } else if (e.key === "r" || e.key === "R") {
    synth.rotate(now());
  } else if (e.key === "p" || e.key === "P") {
    connection.send("snapshot_request");
  } else if (e.key === "g" || e.key === "G") {
    recording = !recording;
    connection.send(`record ${recording ? "on" : "off"}`);
    modeLabel.textContent = `recording: ${recording ? "on" : "off"}`;
  }
});

function frame(): void {
  if (scene.connected && registered) synth.tick(now());
  render(ctx, scene, synth, canvas.width, canvas.height);
  logPane.textContent = scene.log.slice(-14).join("\n");
  requestAnimationFrame(frame);
}

requestAnimationFrame(frame);
