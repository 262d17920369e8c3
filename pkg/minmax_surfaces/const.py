"""Constants for the min-max solver."""

DOMAIN = "minmax_surfaces"

# Domain modes
MODE_PLANAR_2D = "planar2d"
MODE_BODY_3D = "body3d"

# Constraint modes
CONSTRAINED = "constrained"
UNCONSTRAINED = "unconstrained"

# Configuration keys
CONF_NAME = "name"
CONF_SCENARIO = "scenario"
CONF_DOMAIN = "domain"
CONF_MODE = "mode"
CONF_FAMILY = "family"
CONF_TIGHTEN = "tighten"
CONF_AMIN = "amin"
CONF_COMB = "comb"
CONF_PLATEAU = "plateau"
CONF_DIAGNOSTICS = "diagnostics"
CONF_OUTPUT_DIR = "output_dir"
CONF_SEED = "seed"
CONF_BOUNDARY = "boundary"
CONF_PHI_GRID = "phi_grid"
CONF_PHI = "phi"
CONF_SEMI_AXES = "semi_axes"
CONF_GAMMA = "gamma"

# Environment override for the output directory
ENV_OUTPUT_DIR = "MINMAX_OUTPUT_DIR"

# Default values
DEFAULT_OUTPUT_DIR = "out"
DEFAULT_SEED = 0
DEFAULT_THREADS = 1

# Tolerances, relative to the quantity named in the suffix
DEFAULT_TOL_BDRY = 1e-8  # x diam(M)
DEFAULT_STRICT_MARGIN = 1e-6  # x m0
DEFAULT_RESIDUAL_TOL = 1e-3  # x m0 / diam(M)
DEFAULT_TOL_REPLACE = 1e-4  # x mass
DEFAULT_SPEC_TOL = 1e-6
DEFAULT_TOL_ANGLE = 1e-6
DEFAULT_DISTANCE_ZERO = 1e-12  # x scale
DEFAULT_MONOTONICITY_TOL = 5e-3
DEFAULT_FACE_AREA_MIN = 1e-12  # x scale^2

# Boundary sampling for curvature minima
BOUNDARY_SAMPLES_2D = 512
BOUNDARY_SAMPLES_3D = 128

# Conformal factor grid used by metric_distance
DEFAULT_DISTANCE_GRID = 129

# Sweepout defaults
DEFAULT_FAMILY_RESOLUTION = 128
DEFAULT_POLYLINE_VERTICES = 256
DEFAULT_CONTINUITY_FACTOR = 4.0  # x max vertex spacing
DEFAULT_FIBRE_COLLAR = 0.1  # x diam(M)
DEFAULT_LEVEL_SET_TILT = 1e-6

# Pull-tight defaults
DEFAULT_MAX_ITERS = 400
DEFAULT_STEP_SIZE = 0.5
DEFAULT_SPEED_SCALE = 1e-2

# Almost-minimizing search defaults
DEFAULT_AM_STARTS = 8
DEFAULT_AM_STEPS = 400
SURGERY_SAMPLES = 9
HAIRPIN_CANDIDATES = 256
NECK_PINCH = 0.98  # fraction of the neck radius removed
POLE_TOL = 1e-12

# Plateau defaults
DEFAULT_PLATEAU_RESTARTS = 2

# Combinatorial defaults
DEFAULT_ETA = 0.05
RADIUS_RATIO = 9.0

# Step 1 of the refinement: staggered lattice and refined cube offsets
ETA_TILDE_FACTOR = 0.9
REFINED_OFFSET = 0.4
REFINED_HALF_SIDE = 0.6
DELTA_FACTOR = 1.0 / 20.0

# Phases of a scenario run
PHASE_BUILD = "build"
PHASE_TIGHTEN = "tighten"
PHASE_CERTIFY = "certify"
PHASE_REPLACE = "replace"
PHASE_DIAGNOSE = "diagnose"
PHASES = [PHASE_BUILD, PHASE_TIGHTEN, PHASE_CERTIFY, PHASE_REPLACE, PHASE_DIAGNOSE]

# CLI exit codes
EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def omega(p: int) -> int:
    """Return the size of set families used by the combinatorial lemma."""
    return 4**p
