"""Shared fixtures.

The four shipped configs are each run once per session and reused by the
unit tests and the acceptance suite; wall time is recorded alongside the
result so runtime budgets can be checked without re-running.
"""

import time
from fractions import Fraction
from pathlib import Path

import pytest

from twoscale_heat.config import parse_config
from twoscale_heat.pipeline import run_experiment, sweep_epsilon

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def config_path(name):
    return CONFIG_DIR / name


def _timed_run(name):
    cfg = parse_config(config_path(name))
    start = time.perf_counter()
    result = run_experiment(cfg)
    return result, time.perf_counter() - start


@pytest.fixture(scope="session")
def homogeneous_run():
    return _timed_run("homogeneous.cfg")


@pytest.fixture(scope="session")
def example1_run():
    return _timed_run("example1.cfg")


@pytest.fixture(scope="session")
def example2_run():
    return _timed_run("example2.cfg")


@pytest.fixture(scope="session")
def eps_sweep():
    cfg = parse_config(config_path("sweep_single.cfg"))
    start = time.perf_counter()
    result = sweep_epsilon(cfg, [Fraction(1, 4), Fraction(1, 8), Fraction(1, 16)])
    return result, time.perf_counter() - start
