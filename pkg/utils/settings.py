# settings.py

import logging
import os
import sys
from pathlib import Path

# === Project Paths ===
BASE_DIR = Path(__file__).resolve().parents[1]
DOMAINS_DIR = BASE_DIR / "domains"
DATA_DIR = Path(os.getenv("GOALREC_DATA_DIR", str(BASE_DIR / "data")))
DATASETS_DIR = DATA_DIR / "datasets"
MODELS_DIR = DATA_DIR / "models"
RESULTS_DIR = DATA_DIR / "results"

# === Runtime defaults (all optional) ===
N_JOBS = int(os.getenv("GOALREC_N_JOBS", "1"))
LOG_LEVEL = os.getenv("GOALREC_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
# tqdm bars only on an interactive stderr; the CLI turns them off with --quiet
SHOW_PROGRESS = sys.stderr.isatty()

DOMAIN_KINDS = ("hanoi34", "eight_puzzle", "lights_out4")
OBSERVABILITY_LEVELS = (10, 30, 50, 70, 100)


def domain_files(name: str):
    """(domain.pddl, problem.pddl) paths of a fixture directory."""
    folder = DOMAINS_DIR / name
    return folder / "domain.pddl", folder / "problem.pddl"


def setup_logging(level: str = None) -> None:
    logging.basicConfig(level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
                        format=LOG_FORMAT)


def ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path
