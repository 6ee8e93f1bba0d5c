"""
Configuration settings for the unfitted HDG fractured Darcy flow solver.

This file contains the numerical and I/O settings for the application.
Problem data (domain, fractures, boundary conditions, penalties) lives in
scenario files; the values here are plumbing that rarely changes between runs.
Every value can be overridden from a .env file at the repository root or from
the process environment.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
BASE_DIR = Path(__file__).resolve().parent.parent.parent
env_path = os.path.join(BASE_DIR, '.env')

# Load the .env file if it exists
if os.path.exists(env_path):
    load_dotenv(env_path)


def _float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


def _int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


# Application Information
APP_NAME = "Unfitted HDG Fractured Darcy Solver"
APP_VERSION = "1.0.0"
LOG_LEVEL = os.getenv("HDG_LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("HDG_LOG_FILE", os.path.join("logs", "hdg.log"))

# Path Configuration
OUTPUT_DIRECTORY = os.getenv("HDG_OUTPUT_DIRECTORY", "output")
SCENARIO_DIRECTORY = os.path.join(BASE_DIR, "scenarios")

# Geometry Configuration
# Relative to the characteristic length L: vertex perturbation for level sets
# vanishing at mesh vertices.
GEOMETRY_TOLERANCE = _float("HDG_GEOMETRY_TOLERANCE", 1e-10)
# Cuts shorter than this fraction of h_K are discarded.
SLIVER_FRACTION = _float("HDG_SLIVER_FRACTION", 1e-6)
POINT_LOCATION_TOLERANCE = _float("HDG_POINT_LOCATION_TOLERANCE", 1e-12)

# Linear Solver Configuration
SOLVER_TOLERANCE = _float("HDG_SOLVER_TOLERANCE", 1e-12)
SOLVER_MAX_ITER_FACTOR = _int("HDG_SOLVER_MAX_ITER_FACTOR", 20)
DENSE_CHOLESKY_LIMIT = _int("HDG_DENSE_CHOLESKY_LIMIT", 2000)

# Output Configuration
DEFAULT_LINE_SAMPLES = _int("HDG_DEFAULT_LINE_SAMPLES", 200)
CSV_FLOAT_FORMAT = "%.15g"

# Convergence Study Configuration
CONVERGENCE_MESHES = tuple(
    int(n) for n in os.getenv("HDG_CONVERGENCE_MESHES", "8,16,32,64").split(",")
)
