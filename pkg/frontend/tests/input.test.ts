import { describe, expect, test } from "vitest";

import { EDGE, InputSynth, REST_Z } from "../src/input.js";
import { ScriptStep, runScript } from "../src/player.js";

function collect(): { lines: string[]; synth: InputSynth } {
  const lines: string[] = [];
  const synth = new InputSynth((line) => lines.push(line));
  return { lines, synth };
}

function timesOf(lines: string[]): number[] {
  return lines.map((l) => Number(l.split(" ")[1].split("=")[1]));
}

describe("input synthesis", () => {
  test("register emits one pose per cube", () => {
    const { lines, synth } = collect();
    synth.registerCubes(0, ["A", "B", "C"]);
    expect(lines).toHaveLength(3);
    expect(lines[0]).toMatch(/^pose t=0 cube=A /);
  });

  test("drag emits poses at 30 Hz and settles after release", () => {
    const { lines, synth } = collect();
    runScript(synth, [
      { at: 0, action: "register", cubes: ["A"], origin: [0.1, 0.1] },
      { at: 0.2, action: "drag", from: [0.1, 0.1], to: [0.3, 0.1], over: 0.5 },
    ]);
    const poses = lines.filter((l) => l.startsWith("pose"));
    // 1 register + 15 drag moves + 21 settle keepalives
    expect(poses.length).toBe(37);
    const ts = timesOf(poses);
    expect([...ts].sort((a, b) => a - b)).toEqual(ts);
    // The settle tail holds the final position for the binding dwell.
    const last = poses[poses.length - 1];
    expect(last).toContain("p=0.3,0.1,0.0165");
    const settleSpan = ts[ts.length - 1] - ts[15];
    expect(settleSpan).toBeGreaterThanOrEqual(0.5);
  });

  test("click in touch mode emits a tap-shaped contact", () => {
    const { lines, synth } = collect();
    synth.registerCubes(0, ["A"], [0.2, 0.2]);
    synth.setMode(0.1, "touch");
    synth.pointerDown(0.2, 0.2, 0.2);
    synth.pointerUp(0.3);
    const touches = lines.filter((l) => l.startsWith("touch"));
    expect(touches).toHaveLength(2);
    expect(touches[0]).toContain("phase=down");
    expect(touches[0]).toContain("uv=0.5,0.5");
    expect(touches[1]).toContain("phase=up");
  });

  test("touch drag produces a swipe-shaped trajectory", () => {
    const { lines, synth } = collect();
    synth.registerCubes(0, ["A"], [0.2, 0.2]);
    synth.setMode(0.1, "touch");
    synth.pointerDown(0.2, 0.19, 0.2);
    for (let k = 1; k <= 8; k++) {
      synth.pointerMove(0.2 + k * 0.02, 0.19 + k * 0.0035, 0.2);
    }
    synth.pointerUp(0.4);
    const moves = lines.filter((l) => l.includes("phase=move"));
    expect(moves.length).toBe(8);
    const uvs = moves.map((l) => Number(l.match(/uv=([0-9.]+),/)![1]));
    for (let i = 1; i < uvs.length; i++) expect(uvs[i]).toBeGreaterThan(uvs[i - 1]);
  });

  test("hand modes emit hand samples that track the cursor", () => {
    const { lines, synth } = collect();
    synth.registerCubes(0, ["A"], [0.2, 0.2]);
    synth.setMode(0.1, "cover");
    synth.pointerMove(0.2, 0.2, 0.2);
    synth.tick(0.25);
    synth.setMode(0.4, "slide");
    const hands = lines.filter((l) => l.startsWith("hand"));
    expect(hands.length).toBeGreaterThanOrEqual(3);
    // Over the cube top (z = EDGE) in cover mode: palm 2 cm above it.
    const palmZ = Number(hands[0].match(/palm=[-0-9.e]+,[-0-9.e]+,([-0-9.e]+)/)![1]);
    expect(palmZ).toBeCloseTo(EDGE + 0.02, 9);
    // Leaving the mode withdraws the hand out of every band.
    expect(hands[hands.length - 1]).toContain("shape=none");
  });

  test("carry drop lands on top of an underlying cube", () => {
    const { lines, synth } = collect();
    synth.registerCubes(0, ["A", "B"], [0.2, 0.2]);
    synth.setMode(0.05, "carry");
    synth.pointerDown(0.1, 0.26, 0.2); // grab B (staged at x=0.26)
    synth.pointerMove(0.2, 0.2, 0.2); // over A
    synth.pointerUp(0.3);
    synth.tick(2.0);
    const poses = lines.filter((l) => l.includes("cube=B"));
    const last = poses[poses.length - 1];
    const z = Number(last.match(/p=[-0-9.]+,[-0-9.]+,([-0-9.e]+)/)![1]);
    expect(z).toBeCloseTo(REST_Z + EDGE, 9);
  });

  test("shake stream oscillates and returns", () => {
    const { lines, synth } = collect();
    synth.registerCubes(0, ["A"], [0.2, 0.2]);
    synth.shake(0.1, "A");
    synth.tick(3.0);
    const xs = lines
      .filter((l) => l.startsWith("pose") && l.includes("cube=A"))
      .map((l) => Number(l.match(/p=([-0-9.e]+),/)![1]));
    const max = Math.max(...xs);
    const min = Math.min(...xs);
    expect(max).toBeCloseTo(0.225, 9);
    expect(min).toBeCloseTo(0.175, 9);
    expect(xs[xs.length - 1]).toBeCloseTo(0.2, 9);
    let reversals = 0;
    for (let i = 2; i < xs.length; i++) {
      const a = xs[i - 1] - xs[i - 2];
      const b = xs[i] - xs[i - 1];
      if (a !== 0 && b !== 0 && Math.sign(a) !== Math.sign(b)) reversals++;
    }
    expect(reversals).toBeGreaterThanOrEqual(3);
  });

  test("rotate stream ends a quarter turn later", () => {
    const { lines, synth } = collect();
    synth.registerCubes(0, ["A"], [0.2, 0.2]);
    synth.rotate(0.1, "A");
    synth.tick(2.0);
    const quats = lines
      .filter((l) => l.startsWith("pose") && l.includes("q=") && !l.includes("q=1,0,0,0"))
      .map((l) => l.split("q=")[1].split(",").map(Number));
    expect(quats.length).toBe(12);
    const [w, , , z] = quats[quats.length - 1];
    expect(w).toBeCloseTo(Math.cos(Math.PI / 4), 9);
    expect(z).toBeCloseTo(Math.sin(Math.PI / 4), 9);
  });

  test("time regression is rejected", () => {
    const { synth } = collect();
    synth.registerCubes(1.0, ["A"]);
    expect(() => synth.registerCubes(0.5, ["B"])).toThrow(/regression/);
  });
});

describe("thin-client determinism", () => {
  const script: ScriptStep[] = [
    { at: 0, action: "register", cubes: ["A", "B"] },
    { at: 0.2, action: "drag", from: [0.05, -0.08], to: [0.31556, 0.27776], over: 0.6 },
    { at: 1.8, action: "drag", from: [0.31556, 0.27776], to: [0.55, 0.2], over: 0.5 },
    { at: 3.2, action: "mode", mode: "touch" },
    { at: 3.3, action: "down", x: 0.55, y: 0.2 },
    { at: 3.4, action: "up" },
    { at: 3.6, action: "mode", mode: "cover" },
    { at: 3.7, action: "move", x: 0.55, y: 0.2 },
    { at: 4.4, action: "move", x: 0.75, y: 0.2 },
    { at: 4.6, action: "mode", mode: "slide" },
    { at: 4.8, action: "shake", cube: "A" },
  ];

  test("identical scripts produce identical sample streams", () => {
    const runs: string[][] = [];
    for (let i = 0; i < 2; i++) {
      const { lines, synth } = collect();
      runScript(synth, script);
      runs.push(lines);
    }
    expect(runs[0]).toEqual(runs[1]);
    expect(runs[0].length).toBeGreaterThan(80);
  });
});
