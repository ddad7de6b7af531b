"""Package-wide constants and tunable defaults.

Everything geometric is expressed in planar meters unless a name says
otherwise; "canonical" coordinates live in the block frame where the
minimum rotated rectangle maps onto [-1, 1] x [-1, 1].
"""

# Geometric tolerance in canonical units / meters.
GEOM_EPS = 1e-9

# Fixed slot grid for the layout graph.
GRID_ROWS = 10
GRID_COLS = 12

# Height normalization cap in meters; h = clamp(height / cap, 0, 1).
HEIGHT_CAP_M = 200.0

# Row clustering floor in canonical units (block spans 2.0).
ROW_TAU_MIN = 0.05

# De-canonicalization: clip inset and minimum surviving footprint area.
CLIP_INSET_M = 0.5
MIN_BUILDING_AREA_M2 = 4.0

# Discretization used by the cross-entropy supervised heads.
HEIGHT_BINS = 40
EDGE_BINS = 32

# Condition raster and embedding.
RASTER_SIZE = 64
EMBED_DIM = 128

# Default land-use classes (index order is the class code).
LANDUSE_CLASSES = ("residential", "commercial", "industrial", "public", "recreation")

# Width of the keyhole slit that turns courtyard rings into simple polygons,
# in unit-box coordinates.
COURTYARD_SLIT = 1e-4
