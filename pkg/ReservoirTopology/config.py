import os
import logging
from dotenv import load_dotenv

# Load environment variables from .env file in the parent directory or current directory
dotenv_path = os.path.join(os.path.dirname(__file__), '..', '.env')
if not os.path.exists(dotenv_path):
    dotenv_path = os.path.join(os.getcwd(), '.env')

load_dotenv(dotenv_path=dotenv_path)

logger = logging.getLogger(__name__)


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring {name}={raw!r}: not an integer, using {default}.")
        return default


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"Ignoring {name}={raw!r}: not a number, using {default}.")
        return default


# Parallelism (0 or unset = every core)
RESERVOIR_TOPO_THREADS = _int_env("RESERVOIR_TOPO_THREADS", 0)

# Logging
RESERVOIR_TOPO_LOG_LEVEL = os.getenv("RESERVOIR_TOPO_LOG_LEVEL", "INFO").upper()

# Excursion filtration
RESERVOIR_TOPO_STEP = _float_env("RESERVOIR_TOPO_STEP", 0.01)

# Cell budgets for the matrix-reduction paths
RESERVOIR_TOPO_MATRIX_BUDGET = _int_env("RESERVOIR_TOPO_MATRIX_BUDGET", 2_000_000)
RESERVOIR_TOPO_ORACLE_BUDGET = _int_env("RESERVOIR_TOPO_ORACLE_BUDGET", 200_000)

# Sequential Gaussian simulation
RESERVOIR_TOPO_TEMPLATE_NODES = _int_env("RESERVOIR_TOPO_TEMPLATE_NODES", 4096)
RESERVOIR_TOPO_MULTIGRID_LEVELS = _int_env("RESERVOIR_TOPO_MULTIGRID_LEVELS", 3)

TOOL_VERSION = "0.3.0"


def get_thread_count() -> int:
    """Number of joblib workers to use (-1 means every core)."""
    if RESERVOIR_TOPO_THREADS <= 0:
        return -1
    return RESERVOIR_TOPO_THREADS


def get_log_level() -> int:
    """Resolve the configured log level name, falling back to INFO."""
    level = logging.getLevelName(RESERVOIR_TOPO_LOG_LEVEL)
    if not isinstance(level, int):
        return logging.INFO
    return level


# Debug configuration loading
def debug_config():
    """Print configuration values for debugging."""
    print("\n==== Reservoir Topology Configuration ====")
    print(f"Threads: {RESERVOIR_TOPO_THREADS if RESERVOIR_TOPO_THREADS > 0 else 'all cores'}")
    print(f"Log level: {RESERVOIR_TOPO_LOG_LEVEL}")
    print(f"Filtration step: {RESERVOIR_TOPO_STEP}")
    print(f"Matrix reduction budget: {RESERVOIR_TOPO_MATRIX_BUDGET} cells")
    print(f"Homology oracle budget: {RESERVOIR_TOPO_ORACLE_BUDGET} cells")
    print(f"SGS template nodes: {RESERVOIR_TOPO_TEMPLATE_NODES}")
    print(f"SGS multiple-grid levels: {RESERVOIR_TOPO_MULTIGRID_LEVELS}")
    print(f"Tool version: {TOOL_VERSION}")
    print("==========================================\n")


if __name__ == "__main__":
    debug_config()
