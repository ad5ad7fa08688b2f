# config.py
import os
from dotenv import load_dotenv

# Load variables from .env file into the environment (optional for this project)
load_dotenv()


def _env_float(name: str, default: float) -> float:
    value = os.getenv(f"QUANTRIX_{name}")
    return float(value) if value is not None else default


def _env_int(name: str, default: int) -> int:
    value = os.getenv(f"QUANTRIX_{name}")
    return int(value) if value is not None else default


def _env_str(name: str, default: str) -> str:
    return os.getenv(f"QUANTRIX_{name}", default)


# ------------------ Numeric Tolerances ------------------
# Probabilities are normalized to this tolerance; locations are compared exactly.
PROB_TOL = _env_float("PROB_TOL", 1e-12)

# ------------------ Quantile Dynamic Programming ------------------
QDP_TOL_INF = _env_float("QDP_TOL_INF", 1e-10)
# The bisection step is only accurate to BISECTION_TOL, so its stopping rule is looser.
QDP_TOL_INF_CONTINUOUS = _env_float("QDP_TOL_INF_CONTINUOUS", 1e-6)
QDP_MAX_ITERS = _env_int("QDP_MAX_ITERS", 10_000)
# Extra discrete iterations allowed while polishing a converged table onto an exact float fixed point.
QDP_POLISH_ITERS = _env_int("QDP_POLISH_ITERS", 200)
# Polished entries this close (relative) to a short decimal are moved onto it when that stays a fixed point.
QDP_SNAP_DECIMALS = _env_int("QDP_SNAP_DECIMALS", 9)
QDP_SNAP_TOL = _env_float("QDP_SNAP_TOL", 1e-12)
BISECTION_TOL = _env_float("BISECTION_TOL", 1e-8)
BISECTION_MAX_DOUBLINGS = _env_int("BISECTION_MAX_DOUBLINGS", 60)

# ------------------ Learning Schedules ------------------
# alpha_k = c / (1 + k)^rho
DEFAULT_SCHEDULE_C = _env_float("DEFAULT_SCHEDULE_C", 0.5)
DEFAULT_SCHEDULE_RHO = _env_float("DEFAULT_SCHEDULE_RHO", 0.7)
# Transitions are pre-drawn per state in chunks of this size.
SAMPLE_CHUNK = _env_int("SAMPLE_CHUNK", 4096)

# ------------------ Dynamics ------------------
EULER_DT = _env_float("EULER_DT", 0.01)
EULER_HORIZON = _env_float("EULER_HORIZON", 200.0)

# ------------------ Fixed-Point Set Diagnostics ------------------
LAMBDA_SAMPLES = _env_int("LAMBDA_SAMPLES", 32)
# All 2^(X*m) corner lambdas are enumerated up to this many coordinates.
CORNER_ENUMERATION_LIMIT = _env_int("CORNER_ENUMERATION_LIMIT", 12)

# ------------------ Monte Carlo Ground Truth ------------------
MC_TRUNCATION_EPS = _env_float("MC_TRUNCATION_EPS", 1e-6)
MC_SAMPLES = _env_int("MC_SAMPLES", 1_000_000)
MC_BOOTSTRAP = _env_int("MC_BOOTSTRAP", 20)

# ------------------ Runner Config ------------------
MAX_CONCURRENT_RUNS = _env_int("MAX_CONCURRENT_RUNS", 4)
OUTPUT_DIR = _env_str("OUTPUT_DIR", os.path.join("runs", "latest"))
CONFIG_DIR = "configs"

# ------------------ Logging ------------------
LOG_LEVEL = _env_str("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
