/**
 * Scripted input player: replays a list of timed UI actions through an
 * InputSynth on a fixed 30 Hz virtual clock. Two runs of the same script
 * produce identical sample lines, which is the thin-client guarantee the
 * end-to-end tests lean on.
 */

import { InputSynth, Mode, TICK_HZ } from "./input.js";

export type ScriptStep =
  | { at: number; action: "register"; cubes: string[]; origin?: [number, number] }
  | { at: number; action: "mode"; mode: Mode }
  | { at: number; action: "down"; x: number; y: number }
  | { at: number; action: "move"; x: number; y: number }
  | { at: number; action: "up" }
  | { at: number; action: "drag"; from: [number, number]; to: [number, number]; over: number }
  | { at: number; action: "shake"; cube?: string }
  | { at: number; action: "rotate"; cube?: string };

/** Expand compound steps (drag) into primitive pointer actions. */
function expand(script: ScriptStep[]): ScriptStep[] {
  const out: ScriptStep[] = [];
  for (const step of script) {
    if (step.action === "drag") {
      const moves = Math.max(2, Math.round(step.over * TICK_HZ));
      out.push({ at: step.at, action: "down", x: step.from[0], y: step.from[1] });
      for (let k = 1; k <= moves; k++) {
        const f = k / moves;
        out.push({
          at: step.at + (step.over * k) / moves,
          action: "move",
          x: step.from[0] + (step.to[0] - step.from[0]) * f,
          y: step.from[1] + (step.to[1] - step.from[1]) * f,
        });
      }
      out.push({ at: step.at + step.over + 1 / TICK_HZ, action: "up" });
    } else {
      out.push(step);
    }
  }
  return out.sort((a, b) => a.at - b.at);
}

export function runScript(synth: InputSynth, script: ScriptStep[], tail = 1.0): void {
  const steps = expand(script);
  const end = (steps.length > 0 ? steps[steps.length - 1].at : 0) + tail;
  let i = 0;
  const dt = 1 / TICK_HZ;
  for (let tick = 0; tick * dt <= end; tick++) {
    const now = tick * dt;
    while (i < steps.length && steps[i].at <= now) {
      const step = steps[i++];
      switch (step.action) {
        case "register":
          synth.registerCubes(step.at, step.cubes, step.origin);
          break;
        case "mode":
          synth.setMode(step.at, step.mode);
          break;
        case "down":
          synth.pointerDown(step.at, step.x, step.y);
          break;
        case "move":
          synth.pointerMove(step.at, step.x, step.y);
          break;
        case "up":
          synth.pointerUp(step.at);
          break;
        case "shake":
          synth.shake(step.at, step.cube);
          break;
        case "rotate":
          synth.rotate(step.at, step.cube);
          break;
      }
    }
    synth.tick(now);
  }
}
