import { landUseColor, ViewState } from "./state";
import type { LayoutFeature } from "./types";

/**
 * Canvas renderer. The 2D plan view is primary; the 3D view is an oblique
 * axonometric extrusion of the same layout data (no separate data path).
 */
export function render(ctx: CanvasRenderingContext2D, state: ViewState, width: number, height: number) {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#f5f3ef";
  ctx.fillRect(0, 0, width, height);
  if (!state.blocks.size) return;
  if (state.mode === "2d") render2d(ctx, state);
  else render3d(ctx, state);
}

function tracePath(ctx: CanvasRenderingContext2D, pts: [number, number][]) {
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
  ctx.closePath();
}

function render2d(ctx: CanvasRenderingContext2D, state: ViewState) {
  for (const id of state.order) {
    const block = state.blocks.get(id)!;
    const pts = block.ring.map(([x, y]) => state.toScreen(x, y));
    tracePath(ctx, pts);
    ctx.fillStyle = landUseColor(block.land_use);
    ctx.globalAlpha = 0.55;
    ctx.fill();
    ctx.globalAlpha = 1.0;
    ctx.lineWidth = state.selection.has(id) ? 3 : 1;
    ctx.strokeStyle = state.selection.has(id) ? "#1a1a1a" : "#6b6b6b";
    ctx.setLineDash(block.stale ? [6, 4] : []);
    ctx.stroke();
    ctx.setLineDash([]);
    if (block.stale) badge(ctx, pts, "~", "#b3541e");
    if (block.error) badge(ctx, pts, "!", "#c0392b");
  }
  for (const f of state.layout?.features ?? []) {
    const ring = f.geometry.coordinates[0].map(([x, y]) =>
      state.toScreen(x, y),
    );
    tracePath(ctx, ring);
    ctx.fillStyle = "#5d5d66";
    ctx.globalAlpha = 0.85;
    ctx.fill();
    ctx.globalAlpha = 1.0;
  }
}

function badge(ctx: CanvasRenderingContext2D, pts: [number, number][], glyph: string, color: string) {
  const cx = pts.reduce((a, p) => a + p[0], 0) / pts.length;
  const cy = pts.reduce((a, p) => a + p[1], 0) / pts.length;
  ctx.fillStyle = color;
  ctx.font = "bold 14px sans-serif";
  ctx.fillText(glyph, cx - 4, cy + 5);
}

// axonometric extrusion: plan position plus a vertical offset for height
function project(state: ViewState, x: number, y: number, z: number): [number, number] {
  const [sx, sy] = state.toScreen(x, y);
  return [sx, sy - z * state.camera.scale * 0.8];
}

function render3d(ctx: CanvasRenderingContext2D, state: ViewState) {
  // ground: blocks as flat plates
  for (const id of state.order) {
    const block = state.blocks.get(id)!;
    const pts = block.ring.map(([x, y]) => project(state, x, y, 0));
    tracePath(ctx, pts);
    ctx.fillStyle = landUseColor(block.land_use);
    ctx.globalAlpha = 0.4;
    ctx.fill();
    ctx.globalAlpha = 1.0;
    ctx.strokeStyle = state.selection.has(id) ? "#1a1a1a" : "#9a9a9a";
    ctx.lineWidth = state.selection.has(id) ? 2.5 : 1;
    ctx.stroke();
  }
  // buildings: painter-sorted extrusions, walls then roof
  const feats = [...(state.layout?.features ?? [])];
  feats.sort((a, b) => meanY(b) - meanY(a));
  for (const f of feats) {
    const ring = f.geometry.coordinates[0].slice(0, -1);
    const h = f.properties.height;
    const bottom = ring.map(([x, y]) => project(state, x, y, 0));
    const top = ring.map(([x, y]) => project(state, x, y, h));
    for (let i = 0; i < ring.length; i++) {
      const j = (i + 1) % ring.length;
      // draw only south-facing walls (screen-space lower edges)
      if (bottom[j][0] < bottom[i][0]) continue;
      tracePath(ctx, [bottom[i], bottom[j], top[j], top[i]]);
      ctx.fillStyle = "#8e8e99";
      ctx.fill();
      ctx.strokeStyle = "#55555e";
      ctx.lineWidth = 0.5;
      ctx.stroke();
    }
    tracePath(ctx, top);
    ctx.fillStyle = "#b8b8c4";
    ctx.fill();
    ctx.strokeStyle = "#55555e";
    ctx.lineWidth = 0.75;
    ctx.stroke();
  }
}

function meanY(f: LayoutFeature): number {
  const ring = f.geometry.coordinates[0];
  return ring.reduce((a, c) => a + c[1], 0) / ring.length;
}
