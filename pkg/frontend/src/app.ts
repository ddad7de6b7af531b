import { ApiClient, ApiError } from "./api";
import { render } from "./render";
import {
  diffLayouts,
  LAND_USE_PALETTE,
  parseBlockRings,
  ViewState,
} from "./state";
import type { LayoutCollection, RegenerateScope } from "./types";

const CLASS_NAMES = ["residential", "commercial", "industrial", "public", "recreation"];

/**
 * District editor: load blocks, select, recolor land use, regenerate, and
 * inspect the layout in 2D or extruded 3D. All layout state lives on the
 * server; the client only mirrors responses.
 */
export class App {
  readonly state = new ViewState();
  private canvas: HTMLCanvasElement;
  private banner: HTMLDivElement;
  private classSelect: HTMLSelectElement;
  private applyButton: HTMLButtonElement;
  private scopeSelect: HTMLSelectElement;
  private regenButton: HTMLButtonElement;
  private modeButton: HTMLButtonElement;
  private fileInput: HTMLInputElement;
  private statusLine: HTMLDivElement;
  private generateQueue: Promise<void> = Promise.resolve();
  lastDiff: string[] = [];

  constructor(
    root: HTMLElement,
    private api: ApiClient,
    nClasses = 5,
  ) {
    root.innerHTML = `
      <div class="toolbar">
        <label class="file-label">Load district
          <input type="file" accept=".geojson,.json" data-role="file" />
        </label>
        <select data-role="class"></select>
        <button data-role="apply" disabled>Apply land use</button>
        <select data-role="scope">
          <option value="stale">stale</option>
          <option value="selection">selection</option>
          <option value="all">all</option>
        </select>
        <button data-role="regen" disabled>Regenerate</button>
        <button data-role="mode">3D view</button>
        <span data-role="status" class="status"></span>
      </div>
      <div data-role="banner" class="banner" hidden></div>
      <canvas data-role="canvas" width="960" height="640"></canvas>
      <div class="legend">${LAND_USE_PALETTE.slice(0, nClasses)
        .map((c, i) => `<span><i style="background:${c}"></i>${CLASS_NAMES[i] ?? i}</span>`)
        .join("")}</div>
    `;
    this.canvas = root.querySelector('[data-role="canvas"]')!;
    this.banner = root.querySelector('[data-role="banner"]')!;
    this.classSelect = root.querySelector('[data-role="class"]')!;
    this.applyButton = root.querySelector('[data-role="apply"]')!;
    this.scopeSelect = root.querySelector('[data-role="scope"]')!;
    this.regenButton = root.querySelector('[data-role="regen"]')!;
    this.modeButton = root.querySelector('[data-role="mode"]')!;
    this.fileInput = root.querySelector('[data-role="file"]')!;
    this.statusLine = root.querySelector('[data-role="status"]')!;

    for (let k = 0; k < nClasses; k++) {
      const opt = document.createElement("option");
      opt.value = String(k);
      opt.textContent = `${k}: ${CLASS_NAMES[k] ?? "class " + k}`;
      this.classSelect.appendChild(opt);
    }
    this.fileInput.addEventListener("change", () => this.onFileChosen());
    this.canvas.addEventListener("click", (ev) => this.onCanvasClick(ev));
    this.applyButton.addEventListener("click", () => {
      void this.applyLandUse(Number(this.classSelect.value));
    });
    this.regenButton.addEventListener("click", () => {
      void this.regenerate(this.scopeSelect.value as RegenerateScope);
    });
    this.modeButton.addEventListener("click", () => {
      this.state.mode = this.state.mode === "2d" ? "3d" : "2d";
      this.modeButton.textContent = this.state.mode === "2d" ? "3D view" : "2D view";
      this.draw();
    });
  }

  private onFileChosen() {
    const file = this.fileInput.files?.[0];
    if (!file) return;
    const reader = new FileReader();
    reader.onload = () => void this.loadDistrict(String(reader.result));
    reader.readAsText(file);
  }

  /** POST the blocks file and render the colored block map. */
  async loadDistrict(blocksGeojson: string): Promise<void> {
    this.clearBanner();
    let rings;
    try {
      rings = parseBlockRings(blocksGeojson);
    } catch (err) {
      this.showBanner(`invalid file: ${(err as Error).message}`);
      return;
    }
    try {
      const res = await this.api.createDistrict(blocksGeojson);
      this.state.districtId = res.district_id;
      this.state.loadBlocks(res.blocks, rings);
      this.state.fitCamera(this.canvas.width, this.canvas.height);
      this.setStatus(`district ${res.district_id}: ${res.blocks.length} blocks`);
    } catch (err) {
      this.showBanner(this.describe(err));
      return;
    }
    this.updateControls();
    this.draw();
  }

  private onCanvasClick(ev: MouseEvent) {
    if (!this.state.districtId) return;
    const rect = this.canvas.getBoundingClientRect();
    const [wx, wy] = this.state.toWorld(ev.clientX - rect.left, ev.clientY - rect.top);
    const hit = this.state.hitBlock(wx, wy);
    if (hit) this.toggleSelect(hit);
  }

  toggleSelect(blockId: string) {
    this.state.toggleSelect(blockId);
    this.updateControls();
    this.draw();
  }

  /** PATCH each selected block; per-block failures surface without aborting. */
  async applyLandUse(landUse: number): Promise<void> {
    if (!this.state.districtId || !this.state.selection.size) return;
    this.clearBanner();
    for (const bid of [...this.state.selection]) {
      try {
        const summary = await this.api.patchLandUse(this.state.districtId, bid, landUse);
        this.state.applySummaries([summary]);
      } catch (err) {
        const view = this.state.blocks.get(bid);
        if (view) view.error = this.describe(err);
      }
    }
    this.updateControls();
    this.draw();
  }

  /** POST generate for the chosen scope, then re-fetch the layout. */
  regenerate(scope: RegenerateScope, seed?: number): Promise<void> {
    const run = async () => {
      if (!this.state.districtId) return;
      this.clearBanner();
      let blockIds: string[] | undefined;
      if (scope === "selection") blockIds = [...this.state.selection];
      else if (scope === "all") blockIds = [...this.state.order];
      try {
        const res = await this.api.generate(this.state.districtId, blockIds, seed);
        this.state.applySummaries(res.blocks);
        await this.refreshLayout();
        this.setStatus(`regenerated ${res.regenerated.length} block(s)`);
      } catch (err) {
        this.showBanner(this.describe(err));
      }
      this.updateControls();
      this.draw();
    };
    // at most one in-flight generate; later clicks queue behind it
    this.generateQueue = this.generateQueue.then(run);
    return this.generateQueue;
  }

  async refreshLayout(): Promise<void> {
    if (!this.state.districtId) return;
    const { layout, etag } = await this.api.getLayout(this.state.districtId);
    const diff = diffLayouts(this.state.layout, layout);
    this.lastDiff = diff.changed;
    this.state.layout = layout as LayoutCollection;
    this.state.etag = etag;
  }

  private describe(err: unknown): string {
    if (err instanceof ApiError) return `${err.error} (${err.status}): ${err.detail}`;
    return String(err);
  }

  private showBanner(message: string) {
    this.state.banner = message;
    this.banner.hidden = false;
    this.banner.textContent = message;
  }

  private clearBanner() {
    this.state.banner = null;
    this.banner.hidden = true;
    this.banner.textContent = "";
  }

  private setStatus(text: string) {
    this.statusLine.textContent = text;
  }

  private updateControls() {
    this.applyButton.disabled = this.state.selection.size === 0;
    this.regenButton.disabled = !this.state.districtId;
  }

  draw() {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return; // environments without a 2D context (tests stub this)
    render(ctx, this.state, this.canvas.width, this.canvas.height);
  }

  renderedBuildingCount(): number {
    return this.state.layout?.features.length ?? 0;
  }
}
