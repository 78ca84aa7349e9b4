import { describe, expect, test } from "vitest";

import { applyFrame, newScene, slotCenter } from "../src/scene.js";

const WELCOME =
  "welcome version=1 dataset=health rulebook=default map=0.0,0.0,0.4,0.4 " +
  "interaction=0.45,0.0,0.85,0.4 anchor=0.65,0.45,0.0 unit=USD%20per%20capita " +
  "bins=1990-2000,2000-2010,2010-2020 palette=yellow,purple,teal,orange,blue,red,green,pink " +
  "slots=CHN:0.7889:0.6944:China;JPN:0.8833:0.7:Japan";

const CHART_CREATED =
  "report t=1.0 items=chart-delta op=created id=anchored placement=anchored subject=- " +
  "structure=neighbored vis=bar detail=false zoom=1.0 pan=0.0,0.0 extent=0.0,902.96 " +
  "bins=1990-2000,2000-2010,2010-2020 highlights=- series=CHN:0:false:0:728.33,406.23,239.93";

describe("scene state", () => {
  test("welcome populates layout and banner", () => {
    const scene = newScene();
    applyFrame(scene, WELCOME);
    expect(scene.connected).toBe(true);
    expect(scene.welcome?.slots).toHaveLength(2);
    const [x, y] = slotCenter(scene.welcome!, "CHN");
    expect(x).toBeCloseTo(0.31556, 5);
    expect(y).toBeCloseTo(0.27776, 5);
  });

  test("binding delta lights the slot", () => {
    const scene = newScene();
    applyFrame(scene, WELCOME);
    applyFrame(scene, "report t=0.5 items=binding-delta op=bound cube=A region=CHN color=0");
    expect(scene.slotColors.get("CHN")).toBe(0);
    expect(scene.boundCubes.get("A")).toBe("CHN");
    applyFrame(scene, "report t=2.5 items=binding-delta op=unbound cube=A region=CHN color=0");
    expect(scene.slotColors.has("CHN")).toBe(false);
  });

  test("chart deltas create, update, and remove renderings", () => {
    const scene = newScene();
    applyFrame(scene, WELCOME);
    applyFrame(scene, CHART_CREATED);
    expect(scene.charts.get("anchored")?.series[0].color).toBe(0);
    applyFrame(scene, CHART_CREATED.replace("op=created", "op=updated").replace("CHN:0:", "CHN:1:"));
    expect(scene.charts.get("anchored")?.series[0].color).toBe(1);
    applyFrame(scene, "report t=2.0 items=chart-delta op=removed id=anchored");
    expect(scene.charts.has("anchored")).toBe(false);
  });

  test("malformed frame keeps the previous rendering", () => {
    const scene = newScene();
    applyFrame(scene, WELCOME);
    applyFrame(scene, CHART_CREATED);
    const before = scene.charts.get("anchored");
    const result = applyFrame(
      scene,
      "report t=3.0 items=chart-delta op=created id=anchored placement=bogus",
    );
    expect(result).toBeNull();
    expect(scene.charts.get("anchored")).toBe(before);
  });

  test("server error lands in the banner", () => {
    const scene = newScene();
    applyFrame(scene, 'error code=sample message="timestamp regressed"');
    expect(scene.banner).toContain("timestamp regressed");
  });
});
