import { describe, expect, it } from "vitest";

import {
  diffLayouts,
  featuresByBlock,
  LAND_USE_PALETTE,
  landUseColor,
  parseBlockRings,
  pointInRing,
  ViewState,
} from "../src/state";
import type { BlockSummary, LayoutCollection, LayoutFeature } from "../src/types";

function summary(id: string, landUse = 0): BlockSummary {
  return { id, land_use: landUse, stale: true, generated: false, n_buildings: 0 };
}

function ring(x: number, y: number, s: number): [number, number][] {
  return [
    [x, y],
    [x + s, y],
    [x + s, y + s],
    [x, y + s],
  ];
}

function feature(blockId: string, x: number): LayoutFeature {
  return {
    type: "Feature",
    geometry: {
      type: "Polygon",
      coordinates: [[[x, 0], [x + 5, 0], [x + 5, 4], [x, 4], [x, 0]]],
    },
    properties: { block_id: blockId, height: 10, shape: "RECT", land_use: 0 },
  };
}

function collection(features: LayoutFeature[]): LayoutCollection {
  return { type: "FeatureCollection", features };
}

describe("palette", () => {
  it("covers all five land-use classes with distinct colors", () => {
    expect(LAND_USE_PALETTE).toHaveLength(5);
    expect(new Set(LAND_USE_PALETTE).size).toBe(5);
    for (let k = 0; k < 5; k++) expect(landUseColor(k)).toBe(LAND_USE_PALETTE[k]);
  });
});

describe("selection", () => {
  function loaded(): ViewState {
    const s = new ViewState();
    s.loadBlocks(
      [summary("a"), summary("b")],
      new Map([
        ["a", ring(0, 0, 10)],
        ["b", ring(20, 0, 10)],
      ]),
    );
    return s;
  }

  it("toggles membership and ignores unknown ids", () => {
    const s = loaded();
    s.toggleSelect("a");
    expect([...s.selection]).toEqual(["a"]);
    s.toggleSelect("a");
    expect(s.selection.size).toBe(0);
    s.toggleSelect("ghost");
    expect(s.selection.size).toBe(0);
  });

  it("selection is a subset of loaded blocks after reload", () => {
    const s = loaded();
    s.toggleSelect("a");
    s.loadBlocks([summary("c")], new Map([["c", ring(0, 0, 5)]]));
    expect(s.selection.size).toBe(0);
    expect([...s.blocks.keys()]).toEqual(["c"]);
  });

  it("hit testing finds the containing block", () => {
    const s = loaded();
    expect(s.hitBlock(5, 5)).toBe("a");
    expect(s.hitBlock(25, 5)).toBe("b");
    expect(s.hitBlock(100, 100)).toBeNull();
  });
});

describe("pointInRing", () => {
  it("classifies inside and outside", () => {
    const r = ring(0, 0, 10);
    expect(pointInRing(5, 5, r)).toBe(true);
    expect(pointInRing(-1, 5, r)).toBe(false);
    expect(pointInRing(11, 5, r)).toBe(false);
  });
});

describe("camera", () => {
  it("fit + round trip through screen coordinates", () => {
    const s = new ViewState();
    s.loadBlocks([summary("a")], new Map([["a", ring(100, 50, 40)]]));
    s.fitCamera(800, 600);
    const [sx, sy] = s.toScreen(120, 70);
    const [wx, wy] = s.toWorld(sx, sy);
    expect(wx).toBeCloseTo(120, 6);
    expect(wy).toBeCloseTo(70, 6);
    // world bounds land inside the canvas
    for (const [x, y] of ring(100, 50, 40)) {
      const [px, py] = s.toScreen(x, y);
      expect(px).toBeGreaterThanOrEqual(0);
      expect(px).toBeLessThanOrEqual(800);
      expect(py).toBeGreaterThanOrEqual(0);
      expect(py).toBeLessThanOrEqual(600);
    }
  });
});

describe("layout diffing", () => {
  it("groups features per block", () => {
    const grouped = featuresByBlock(collection([feature("a", 0), feature("a", 10), feature("b", 0)]));
    expect(grouped.get("a")).toHaveLength(2);
    expect(grouped.get("b")).toHaveLength(1);
  });

  it("flags only geometry changes", () => {
    const before = collection([feature("a", 0), feature("b", 0)]);
    const after = collection([feature("a", 0), feature("b", 3)]);
    const diff = diffLayouts(before, after);
    expect(diff.changed).toEqual(["b"]);
    expect(diff.unchanged).toEqual(["a"]);
  });

  it("treats added and removed blocks as changed", () => {
    const before = collection([feature("a", 0)]);
    const after = collection([feature("a", 0), feature("c", 5)]);
    expect(diffLayouts(before, after).changed).toEqual(["c"]);
    expect(diffLayouts(null, after).changed).toEqual(["a", "c"]);
  });

  it("order-insensitive within a block", () => {
    const before = collection([feature("a", 0), feature("a", 10)]);
    const after = collection([feature("a", 10), feature("a", 0)]);
    expect(diffLayouts(before, after).changed).toEqual([]);
  });
});

describe("parseBlockRings", () => {
  it("extracts rings keyed by id", () => {
    const doc = {
      type: "FeatureCollection",
      features: [
        {
          type: "Feature",
          geometry: { type: "Polygon", coordinates: [[[0, 0], [10, 0], [10, 10], [0, 10], [0, 0]]] },
          properties: { id: "blk", land_use: 2 },
        },
      ],
    };
    const rings = parseBlockRings(JSON.stringify(doc));
    expect(rings.get("blk")).toHaveLength(5);
  });

  it("rejects non-collections", () => {
    expect(() => parseBlockRings('{"type": "Feature"}')).toThrow();
  });
});

describe("stale bookkeeping", () => {
  it("staleIds follows summaries", () => {
    const s = new ViewState();
    s.loadBlocks(
      [summary("a"), summary("b")],
      new Map([
        ["a", ring(0, 0, 10)],
        ["b", ring(20, 0, 10)],
      ]),
    );
    expect(s.staleIds()).toEqual(["a", "b"]);
    s.applySummaries([{ ...summary("a"), stale: false, generated: true, n_buildings: 3 }]);
    expect(s.staleIds()).toEqual(["b"]);
    expect(s.blocks.get("a")!.n_buildings).toBe(3);
  });
});
