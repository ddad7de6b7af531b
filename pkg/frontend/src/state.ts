import type {
  BlockSummary,
  BlockView,
  LayoutCollection,
  ViewMode,
} from "./types";

/**
 * Land-use colors, index = class code. Mirrors the block-coloring convention
 * of the service: 0 residential, 1 commercial, 2 industrial, 3 public,
 * 4 recreation.
 */
export const LAND_USE_PALETTE = [
  "#e8c875", // residential: warm sand
  "#d96a6a", // commercial: red
  "#9a7fb8", // industrial: violet
  "#6a9ad9", // public: blue
  "#7dbb7d", // recreation: green
];

export function landUseColor(landUse: number): string {
  return LAND_USE_PALETTE[landUse % LAND_USE_PALETTE.length];
}

export interface Camera {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/** All client state; rendering is a pure function of this. */
export class ViewState {
  districtId: string | null = null;
  blocks: Map<string, BlockView> = new Map();
  order: string[] = [];
  selection: Set<string> = new Set();
  layout: LayoutCollection | null = null;
  etag = "";
  mode: ViewMode = "2d";
  camera: Camera = { scale: 1, offsetX: 0, offsetY: 0 };
  banner: string | null = null;

  loadBlocks(summaries: BlockSummary[], rings: Map<string, [number, number][]>) {
    this.blocks = new Map();
    this.order = [];
    this.selection.clear();
    this.layout = null;
    this.etag = "";
    for (const s of summaries) {
      const ring = rings.get(s.id);
      if (!ring) continue;
      this.blocks.set(s.id, { ...s, ring });
      this.order.push(s.id);
    }
  }

  applySummaries(summaries: BlockSummary[]) {
    for (const s of summaries) {
      const view = this.blocks.get(s.id);
      if (view) Object.assign(view, s, { error: undefined });
    }
  }

  toggleSelect(blockId: string) {
    if (this.selection.has(blockId)) this.selection.delete(blockId);
    else if (this.blocks.has(blockId)) this.selection.add(blockId);
  }

  clearSelection() {
    this.selection.clear();
  }

  staleIds(): string[] {
    return this.order.filter((id) => this.blocks.get(id)?.stale);
  }

  worldBounds(): [number, number, number, number] | null {
    let minX = Infinity,
      minY = Infinity,
      maxX = -Infinity,
      maxY = -Infinity;
    for (const b of this.blocks.values()) {
      for (const [x, y] of b.ring) {
        minX = Math.min(minX, x);
        minY = Math.min(minY, y);
        maxX = Math.max(maxX, x);
        maxY = Math.max(maxY, y);
      }
    }
    return this.blocks.size ? [minX, minY, maxX, maxY] : null;
  }

  fitCamera(width: number, height: number, margin = 20) {
    const bounds = this.worldBounds();
    if (!bounds) return;
    const [minX, minY, maxX, maxY] = bounds;
    const sx = (width - 2 * margin) / Math.max(maxX - minX, 1e-9);
    const sy = (height - 2 * margin) / Math.max(maxY - minY, 1e-9);
    const scale = Math.min(sx, sy);
    this.camera = {
      scale,
      offsetX: margin - minX * scale + (width - 2 * margin - (maxX - minX) * scale) / 2,
      offsetY: margin + maxY * scale + (height - 2 * margin - (maxY - minY) * scale) / 2,
    };
  }

  /** World meters -> canvas pixels (y flipped). */
  toScreen(x: number, y: number): [number, number] {
    return [
      x * this.camera.scale + this.camera.offsetX,
      -y * this.camera.scale + this.camera.offsetY,
    ];
  }

  toWorld(px: number, py: number): [number, number] {
    return [
      (px - this.camera.offsetX) / this.camera.scale,
      -(py - this.camera.offsetY) / this.camera.scale,
    ];
  }

  hitBlock(worldX: number, worldY: number): string | null {
    for (const id of this.order) {
      const b = this.blocks.get(id)!;
      if (pointInRing(worldX, worldY, b.ring)) return id;
    }
    return null;
  }
}

export function pointInRing(x: number, y: number, ring: [number, number][]): boolean {
  let inside = false;
  for (let i = 0, j = ring.length - 1; i < ring.length; j = i++) {
    const [xi, yi] = ring[i];
    const [xj, yj] = ring[j];
    if (yi > y !== yj > y && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

/** Per-block serialized features, for change detection between layouts. */
export function featuresByBlock(layout: LayoutCollection): Map<string, string[]> {
  const out = new Map<string, string[]>();
  for (const f of layout.features) {
    const key = f.properties.block_id;
    if (!out.has(key)) out.set(key, []);
    out.get(key)!.push(JSON.stringify(f));
  }
  for (const list of out.values()) list.sort();
  return out;
}

export interface LayoutDiff {
  changed: string[];
  unchanged: string[];
}

/** Which blocks' building geometries changed between two layout responses. */
export function diffLayouts(
  before: LayoutCollection | null,
  after: LayoutCollection,
): LayoutDiff {
  const prev = before ? featuresByBlock(before) : new Map<string, string[]>();
  const next = featuresByBlock(after);
  const ids = new Set([...prev.keys(), ...next.keys()]);
  const changed: string[] = [];
  const unchanged: string[] = [];
  for (const id of ids) {
    const a = prev.get(id) ?? [];
    const b = next.get(id) ?? [];
    if (a.length === b.length && a.every((v, i) => v === b[i])) unchanged.push(id);
    else changed.push(id);
  }
  changed.sort();
  unchanged.sort();
  return { changed, unchanged };
}

/** Parse a blocks FeatureCollection into boundary rings keyed by block id. */
export function parseBlockRings(text: string): Map<string, [number, number][]> {
  const doc = JSON.parse(text);
  if (doc.type !== "FeatureCollection") {
    throw new Error("expected a FeatureCollection");
  }
  const rings = new Map<string, [number, number][]>();
  for (const feat of doc.features ?? []) {
    const id = feat.properties?.id;
    const coords = feat.geometry?.coordinates?.[0];
    if (id === undefined || !coords) continue;
    rings.set(
      String(id),
      coords.map((c: number[]) => [c[0], c[1]] as [number, number]),
    );
  }
  return rings;
}
