"""citylayout: learn and generate vector 3D urban building layouts per block."""

from .artifactio import (
    GeneratedBuilding,
    GeneratedLayout,
    export_geojson,
    export_obj,
    load_checkpoint,
    load_layouts,
    save_checkpoint,
)
from .blockgraph import (
    BuildingNode,
    GridEdge,
    LayoutGraph,
    assign_grid,
    build_layout_graph,
    compute_edge_weights,
    degraph,
)
from .condition import BlockEncoder, encode_condition, rasterize_block
from .errors import (
    AlignmentError,
    BlockTooDense,
    CityLayoutError,
    CorruptCheckpoint,
    EmptyDataset,
    EmptyDistribution,
    IngestIOError,
    InvalidGeometry,
    InvalidParams,
    NonPositiveHeight,
    ShapeError,
)
from .geometry import (
    CanonicalFrame,
    Polygon,
    canonical_frame,
    from_canonical,
    intersection_area,
    min_rotated_rect,
    polygon_area,
    polygon_iou,
    to_canonical,
)
from .ingest import BlockRecord, RawBuilding, build_dataset, dataset_stats
from .metrics import LayoutSample, MetricsReport, evaluate, layout_similarity, wd_1d
from .model import GATLayer, GraphCVAE, ModelConfig, TrainConfig, gradient_check, sample_layout
from .pipeline import UrbanLayoutModel
from .shapelib import ShapeClass, fit_shape, template_polygon
from .synth import ClassProfile, synth_corpus

__version__ = "0.1.0"
