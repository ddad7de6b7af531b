export interface BlockSummary {
  id: string;
  land_use: number;
  stale: boolean;
  generated: boolean;
  n_buildings: number;
}

export interface DistrictResponse {
  district_id: string;
  blocks: BlockSummary[];
}

export interface GenerateResponse extends DistrictResponse {
  regenerated: string[];
}

export interface PolygonGeometry {
  type: "Polygon";
  coordinates: number[][][];
}

export interface LayoutFeature {
  type: "Feature";
  geometry: PolygonGeometry;
  properties: {
    block_id: string;
    height: number;
    shape: string;
    land_use: number;
  };
}

export interface LayoutCollection {
  type: "FeatureCollection";
  features: LayoutFeature[];
}

/** Client-side view of one block: summary + boundary ring in world meters. */
export interface BlockView extends BlockSummary {
  ring: [number, number][];
  error?: string;
}

export type RegenerateScope = "stale" | "selection" | "all";
export type ViewMode = "2d" | "3d";
