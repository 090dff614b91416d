import os
import sys
from pathlib import Path

sys.path.append(os.path.abspath("./src"))

from settings import config

############################################
# Directories and Environment Configuration
############################################

BASE_DIR = Path(config("BASE_DIR"))
OUTPUT_DIR = Path(config("OUTPUT_DIR"))
SCENARIO_DIR = Path(config("SCENARIO_DIR"))
N_THREADS = config("N_THREADS")

SOURCES = [
    "./src/settings.py",
    "./src/errors.py",
    "./src/misc_tools.py",
    "./src/model.py",
    "./src/gsvd.py",
    "./src/mc_rates.py",
    "./src/linearization.py",
    "./src/freeprob.py",
    "./src/closed_form.py",
    "./src/pgam.py",
    "./src/run_scenario.py",
]

# scenario stem -> extra result tables written next to <stem>.csv
scenario_tasks = {
    "case1": [],
    "case2": [],
    "k_sweep": [],
    "t_sweep": [],
    "closed_case": [],
    "pgam_case2": ["pgam_case2_trace_00.csv", "pgam_case2_baseline_00.csv"],
}


############################################
# Task Definitions
############################################


def task_config():
    """Create the output directory."""
    return {
        "actions": ["python ./src/settings.py"],
        "targets": [OUTPUT_DIR],
        "file_dep": ["./src/settings.py"],
        "clean": [],
    }


def task_test():
    """Run the fast unit tests and doctests."""
    return {
        "actions": ['pytest -m "not slow"'],
        "file_dep": SOURCES,
        "verbosity": 2,
    }


def task_run_scenarios():
    """Run every scenario file and write its rate tables to the output directory."""
    for stem, extras in scenario_tasks.items():
        scenario = SCENARIO_DIR / f"{stem}.toml"
        yield {
            "name": stem,
            "actions": [f"python ./src/run_scenario.py run {scenario} --out {OUTPUT_DIR} --threads {N_THREADS}"],
            "file_dep": [scenario, *SOURCES],
            "targets": [
                OUTPUT_DIR / f"{stem}.csv",
                OUTPUT_DIR / f"{stem}_manifest.json",
                *[OUTPUT_DIR / name for name in extras],
            ],
            "task_dep": ["config"],
            "clean": True,
        }


def task_test_slow():
    """Monte-Carlo agreement checks; run on demand with `doit test_slow`."""
    return {
        "actions": ["pytest -m slow"],
        "file_dep": SOURCES,
        "uptodate": [False],
        "verbosity": 2,
    }


DOIT_CONFIG = {"default_tasks": ["config", "test", "run_scenarios"]}
