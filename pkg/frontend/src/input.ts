/**
 * Turns user input (pointer drags, clicks, hand-cursor modes, canned shake
 * and rotate streams) into canonical sample lines.
 *
 * This layer is pure and clock-agnostic: every call carries an explicit
 * timestamp, and scheduled samples (settle keepalives after a release, the
 * shake oscillation, quarter-turn rotations) are queued with absolute times
 * and drained by tick(). Driving it with a scripted event sequence
 * therefore produces exactly the same sample lines on every run.
 *
 * The recognizer on the other end needs a steady stream while a cube rests
 * on a map slot (binding dwell is evaluated on the cube's own samples), so
 * releasing a cube schedules 0.7 s of 30 Hz keepalive poses.
 */

import { handLine, poseLine, touchLine } from "./protocol.js";

export const EDGE = 0.033;
export const REST_Z = EDGE / 2;
export const CARRY_Z = 0.08;
export const TICK_HZ = 30;
const DT = 1 / TICK_HZ;
const SETTLE_TICKS = 21; // 0.7 s of keepalives covers the 0.5 s binding dwell
const COVER_OFFSET = 0.02;
const HOVER_OFFSET = 0.1;

export type Quat = [number, number, number, number];
export type Mode = "slide" | "carry" | "touch" | "hover-open" | "hover-fist" | "cover" | "idle";

export interface CubeVisual {
  id: string;
  x: number;
  y: number;
  z: number;
  q: Quat;
}

const IDENTITY: Quat = [1, 0, 0, 0];

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatAboutZ(angle: number): Quat {
  return [Math.cos(angle / 2), 0, 0, Math.sin(angle / 2)];
}

interface Queued {
  t: number;
  emit: () => string;
}

export class InputSynth {
  readonly cubes = new Map<string, CubeVisual>();
  mode: Mode = "slide";
  touchPressure = 0.3;
  private sink: (line: string) => void;
  private queue: Array<Queued & { cube?: string }> = [];
  private lastT = -Infinity;
  private selected: string | null = null;
  private dragOffset: [number, number] = [0, 0];
  private contact: { cube: string; id: string } | null = null;
  private contactCount = 0;
  private cursor: [number, number] = [0, 0];
  private handId = "h1";

  constructor(sink: (line: string) => void) {
    this.sink = sink;
  }

  /** Place the virtual tangibles and announce them to the session. */
  registerCubes(t: number, ids: string[], origin: [number, number] = [0.05, -0.08]): void {
    this.drain(t);
    ids.forEach((id, i) => {
      const cube: CubeVisual = {
        id,
        x: origin[0] + i * 0.06,
        y: origin[1],
        z: REST_Z,
        q: IDENTITY,
      };
      this.cubes.set(id, cube);
      this.emit(t, poseLine(t, id, [cube.x, cube.y, cube.z], cube.q));
    });
  }

  cubeAt(x: number, y: number): CubeVisual | null {
    let best: CubeVisual | null = null;
    for (const id of [...this.cubes.keys()].sort()) {
      const cube = this.cubes.get(id)!;
      if (Math.abs(x - cube.x) <= EDGE / 2 && Math.abs(y - cube.y) <= EDGE / 2) {
        if (best === null || cube.z > best.z) best = cube;
      }
    }
    return best;
  }

  setMode(t: number, mode: Mode): void {
    this.drain(t);
    if (this.mode === mode) return;
    if (this.isHandMode(this.mode)) {
      // Leaving a hand mode: show the hand withdrawing so covers release.
      this.emit(t, handLine(t, this.handId, [this.cursor[0], this.cursor[1], 1.0], "none"));
    }
    this.mode = mode;
  }

  pointerDown(t: number, x: number, y: number): void {
    this.drain(t);
    this.cursor = [x, y];
    if (this.mode === "touch") {
      const cube = this.cubeAt(x, y);
      if (cube === null) return;
      this.contactCount += 1;
      this.contact = { cube: cube.id, id: `t${this.contactCount}` };
      this.emit(
        t,
        touchLine(t, cube.id, this.contact.id, "+Z", this.uvOn(cube, x, y), this.touchPressure, "down"),
      );
      return;
    }
    if (this.mode === "slide" || this.mode === "carry") {
      const cube = this.cubeAt(x, y);
      if (cube === null) return;
      this.selected = cube.id;
      this.dragOffset = [x - cube.x, y - cube.y];
      this.cancelQueued(cube.id); // a new grab supersedes any settle in flight
    }
  }

  pointerMove(t: number, x: number, y: number): void {
    this.drain(t);
    this.cursor = [x, y];
    if (this.isHandMode(this.mode)) {
      this.emitHand(t);
      return;
    }
    if (this.mode === "touch" && this.contact !== null) {
      const cube = this.cubes.get(this.contact.cube)!;
      this.emit(
        t,
        touchLine(t, cube.id, this.contact.id, "+Z", this.uvOn(cube, x, y), this.touchPressure, "move"),
      );
      return;
    }
    if ((this.mode === "slide" || this.mode === "carry") && this.selected !== null) {
      const cube = this.cubes.get(this.selected)!;
      cube.x = x - this.dragOffset[0];
      cube.y = y - this.dragOffset[1];
      cube.z = this.mode === "carry" ? CARRY_Z : REST_Z;
      this.emit(t, poseLine(t, cube.id, [cube.x, cube.y, cube.z], cube.q));
    }
  }

  pointerUp(t: number): void {
    this.drain(t);
    if (this.mode === "touch" && this.contact !== null) {
      const cube = this.cubes.get(this.contact.cube)!;
      this.emit(
        t,
        touchLine(
          t, cube.id, this.contact.id, "+Z",
          this.uvOn(cube, this.cursor[0], this.cursor[1]), 0.0, "up",
        ),
      );
      this.contact = null;
      return;
    }
    if (this.selected === null) return;
    const cube = this.cubes.get(this.selected)!;
    this.selected = null;
    if (this.mode === "carry") {
      const landing = this.landingHeight(cube) + EDGE / 2;
      const startZ = cube.z;
      for (let k = 1; k <= 9; k++) {
        const z = startZ + ((landing - startZ) * k) / 9;
        this.schedule(cube.id, t + k * DT, () => {
          cube.z = z;
          return poseLine(t + k * DT, cube.id, [cube.x, cube.y, z], cube.q);
        });
      }
      this.scheduleSettle(cube, t + 9 * DT);
    } else {
      this.scheduleSettle(cube, t);
    }
  }

  /** Canned horizontal oscillation: mouse shaking is hopeless, a scripted
   * stream keeps the recognizer semantics honest. */
  shake(t: number, cubeId?: string): void {
    this.drain(t);
    const cube = this.targetCube(cubeId);
    if (cube === null) return;
    this.cancelQueued(cube.id);
    const x0 = cube.x;
    const legs = [x0 + 0.025, x0 - 0.025, x0 + 0.025, x0 - 0.025, x0];
    let at = t;
    let from = x0;
    for (const target of legs) {
      for (let k = 1; k <= 3; k++) {
        const x = from + ((target - from) * k) / 3;
        const when = at + k * DT;
        this.schedule(cube.id, when, () => {
          cube.x = x;
          return poseLine(when, cube.id, [x, cube.y, cube.z], cube.q);
        });
      }
      at += 3 * DT;
      from = target;
    }
    this.scheduleSettle(cube, at);
  }

  /** Canned quarter turn about the vertical axis. */
  rotate(t: number, cubeId?: string): void {
    this.drain(t);
    const cube = this.targetCube(cubeId);
    if (cube === null) return;
    this.cancelQueued(cube.id);
    const q0 = cube.q;
    for (let k = 1; k <= 12; k++) {
      const q = quatMultiply(quatAboutZ((Math.PI / 2) * (k / 12)), q0);
      const when = t + k * DT;
      this.schedule(cube.id, when, () => {
        cube.q = q;
        return poseLine(when, cube.id, [cube.x, cube.y, cube.z], q);
      });
    }
  }

  /** Emit everything scheduled up to and including t. */
  tick(t: number): void {
    this.drain(t);
    if (this.isHandMode(this.mode)) this.emitHand(t);
  }

  private isHandMode(mode: Mode): boolean {
    return mode === "hover-open" || mode === "hover-fist" || mode === "cover";
  }

  private emitHand(t: number): void {
    const [x, y] = this.cursor;
    const under = this.cubeAt(x, y);
    const top = under === null ? 0 : under.z + EDGE / 2;
    const z = top + (this.mode === "cover" ? COVER_OFFSET : HOVER_OFFSET);
    const shape = this.mode === "hover-fist" ? "fist" : "open";
    this.emit(t, handLine(t, this.handId, [x, y, z], shape));
  }

  private targetCube(cubeId?: string): CubeVisual | null {
    if (cubeId !== undefined) return this.cubes.get(cubeId) ?? null;
    return this.cubeAt(this.cursor[0], this.cursor[1]);
  }

  private uvOn(cube: CubeVisual, x: number, y: number): [number, number] {
    const clamp = (v: number) => Math.min(1, Math.max(0, v));
    return [clamp((x - cube.x) / EDGE + 0.5), clamp((y - cube.y) / EDGE + 0.5)];
  }

  private landingHeight(cube: CubeVisual): number {
    let plane = 0;
    for (const id of [...this.cubes.keys()].sort()) {
      const other = this.cubes.get(id)!;
      if (other.id === cube.id) continue;
      if (Math.abs(other.x - cube.x) < EDGE && Math.abs(other.y - cube.y) < EDGE) {
        plane = Math.max(plane, other.z + EDGE / 2);
      }
    }
    return plane;
  }

  private scheduleSettle(cube: CubeVisual, from: number): void {
    for (let k = 1; k <= SETTLE_TICKS; k++) {
      const when = from + k * DT;
      this.schedule(cube.id, when, () =>
        poseLine(when, cube.id, [cube.x, cube.y, cube.z], cube.q),
      );
    }
  }

  private schedule(cubeId: string, t: number, emit: () => string): void {
    this.queue.push({ t, cube: cubeId, emit });
  }

  private cancelQueued(cubeId: string): void {
    this.queue = this.queue.filter((q) => q.cube !== cubeId);
  }

  private drain(t: number): void {
    this.queue.sort((a, b) => a.t - b.t);
    while (this.queue.length > 0 && this.queue[0].t <= t) {
      const item = this.queue.shift()!;
      this.emit(item.t, item.emit());
    }
  }

  private emit(t: number, line: string): void {
    if (t < this.lastT) throw new Error(`input time regression: ${t} < ${this.lastT}`);
    this.lastT = t;
    this.sink(line);
  }
}
