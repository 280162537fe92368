import os

DEFAULT_THREADS = int(os.environ.get("ROYDENNET_THREADS", "1"))
DISTANCE_CACHE_SIZE = int(os.environ.get("ROYDENNET_DISTANCE_CACHE", "1024"))
DEFAULT_TOL = float(os.environ.get("ROYDENNET_TOL", "1e-8"))
DEFAULT_MAX_SWEEPS = int(os.environ.get("ROYDENNET_MAX_SWEEPS", "100000"))
DEFAULT_SEED = int(os.environ.get("ROYDENNET_SEED", "0"))
DEFAULT_TRIALS = int(os.environ.get("ROYDENNET_TRIALS", "32"))
OUTPUT_DIR = os.environ.get("ROYDENNET_OUTPUT_DIR", ".")
LOG_LEVEL = os.environ.get("ROYDENNET_LOG_LEVEL", "INFO")
RECORD_RUNTIME = os.environ.get("ROYDENNET_RECORD_RUNTIME", "").lower() in ("1", "true", "yes")

SCHEMA = "roydennet/1"

# Multiples of kappa used by the net and transfer constructions.
ADJACENCY_FACTOR = 3.0
BUMP_CORE_FACTOR = 1.0
BUMP_SUPPORT_FACTOR = 1.5
AVERAGING_FACTOR = 4.0
TAIL_FACTOR = 5.0
OVERLAP_FACTOR = 7.0

# Quasi-isometry search grid: a in {1, 1 + A_STEP, ...}, b in {0, B_STEP*kappa, ...}.
QI_A_STEP = 0.25
QI_A_MAX = 64.0
QI_B_STEP = 0.25
QI_B_MAX_FACTOR = 3.0
QI_FULL_SCAN_LIMIT = 500
QI_SAMPLED_PAIRS = 20000

# Scalar root search in the coordinate update; p < 2 also merges free
# neighbours whose values differ by at most FUSE_RATIO of the boundary range.
ROOT_XTOL = 1e-15
ROOT_RTOL = 1e-15
ROOT_MAXITER = 200
FUSE_RATIO = 1e-2


def threads_from_env(value: int | None = None) -> int:
    """Resolve a --threads value, falling back to ROYDENNET_THREADS."""
    return max(1, value if value is not None else DEFAULT_THREADS)
