"""Configuration settings for the he-zoo library and CLI."""

import json
import os
from pathlib import Path
from typing import Dict

# Base paths
PROJECT_ROOT = Path(__file__).parent.parent
PROFILES_DIR = PROJECT_ROOT / "profiles"
REPORTS_DIR = PROJECT_ROOT / "reports"
FIGURES_DIR = REPORTS_DIR / "figures"
VECTORS_DIR = PROJECT_ROOT / "vectors"

# Parameter profiles
PROFILE_ENV_VAR = "HEZOO_PROFILE"
DEFAULT_PROFILE = "desk"
PROFILE_NAMES = ("desk", "paper")

# Wire formats
FORMAT_VERSION = 1  # Leading byte of every envelope and key file
SEED_BYTES = 32
VECTOR_CASES = 4  # Fresh-encryption cases per test-vector file

# Sampling and retry bounds
MAX_KEYGEN_RETRIES = 200  # Restarts for rejection-sampled key material
MAX_SAMPLE_RETRIES = 20000  # Inner rejection loops (points, secrets)
GAUSSIAN_TAIL_SIGMAS = 6  # Discrete Gaussian support cut
MVIDEAL_HEADROOM = 2  # sigma_s * p * headroom must stay below floor(q/2)

# Security relation
LINDNER_PEIKERT_NUMERATOR = 1.8  # log2(delta) = 1.8 / (lambda + 100)
LINDNER_PEIKERT_OFFSET = 100

# Advisor search bounds
ADVISOR_Q_CAP = 2 ** 16  # Largest prime power tried for q_min
ADVISOR_RHO_SLACK = 4  # rho searched up to ceil((6s)^(1/3)) + slack

# Self-test trial counts (full, quick)
SELFTEST_TRIALS = {
    "roundtrip": (100, 20),
    "add": (100, 20),
    "mult": (500, 20),
    "circuits": (200, 20),
    "failure_rate": (10_000, 1_000),
    "reed_sampled": (10_000, 500),
    "refresh": (1_000, 100),
}
BL_STUDY_ETA = 0.1  # Noise rate for the failure-rate study
CKKS_TOLERANCE = 2.0 ** -10  # Max-norm error allowed for approximate results

# Statistical test parameters
ALPHA = 0.05  # Significance level
N_SIGMA = 3.0  # Binomial tolerance band width

# Visualization settings
FIGURE_DPI = 300
FIGURE_FORMAT = "png"
FIGURE_SIZE = (12, 6)


def active_profile_name() -> str:
    """Profile selected through HEZOO_PROFILE (desk when unset)."""
    name = os.environ.get(PROFILE_ENV_VAR, DEFAULT_PROFILE).strip().lower()
    if name not in PROFILE_NAMES:
        raise ValueError(f"{PROFILE_ENV_VAR} must be one of {PROFILE_NAMES}, got {name!r}")
    return name


def load_profile(name: str = None) -> Dict[str, Dict]:
    """Load a parameter profile file keyed by scheme id."""
    name = name or active_profile_name()
    path = PROFILES_DIR / f"{name}.json"
    with open(path) as f:
        return json.load(f)


DESK_PROFILES = load_profile(DEFAULT_PROFILE)

# Create directories if they don't exist
for dir_path in [REPORTS_DIR, FIGURES_DIR, VECTORS_DIR]:
    dir_path.mkdir(parents=True, exist_ok=True)
