import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Project paths
PROJECT_ROOT = Path(__file__).parent.parent
RUNS_DIR = Path(os.getenv("MMIR_RUNS_DIR", PROJECT_ROOT / "runs"))
DATA_DIR = Path(os.getenv("MMIR_DATA_DIR", PROJECT_ROOT / "data"))
LOGS_DIR = PROJECT_ROOT / "logs"

# File names inside a data / run directory
DATASET_FILE = "dataset.jsonl"
METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.json"
MASK_DUMP_FILE = "masks.csv"
CHECKPOINT_DIR = "checkpoints"

# Format versions
DATASET_FORMAT_VERSION = 2
CHECKPOINT_FORMAT_VERSION = 1

# Logging
LOG_FILE = LOGS_DIR / "mmir.log"
LOG_LEVEL = os.getenv("MMIR_LOG_LEVEL", "DEBUG")
LOG_TO_FILE = os.getenv("MMIR_LOG_TO_FILE", "0").lower() in ("1", "true", "yes")
