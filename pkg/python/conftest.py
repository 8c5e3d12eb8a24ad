# Copyright 2026 The gridedge_resilience Authors
#
# Licensed under the Apache License, Version 2.0 (the "License"); you may not
# use this file except in compliance with the License. You may obtain a copy of
# the License at http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations under
# the License.

"""
Pytest configuration to automatically load environment variables from gridedge.env
"""
import os
import sys
from pathlib import Path

import pytest


def load_env_file(env_file: Path):
    """Export `KEY=value` lines from an env file; variables already set win"""
    if not env_file.is_file():
        return

    for raw in env_file.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        line = line.removeprefix("export ").strip()
        key, sep, value = line.partition("=")
        if sep:
            os.environ.setdefault(key.strip(), value.strip().strip("\"'"))


def pytest_configure(config):
    """Load gridedge.env and put the package source root on sys.path."""
    # gridedge.env sits one directory up, next to pyproject.toml
    env_file = Path(__file__).parent.parent / "gridedge.env"
    load_env_file(env_file)
    print(f"Loaded environment variables from {env_file}")
    print(f"GRIDEDGE_MAX_WORKERS: {os.environ.get('GRIDEDGE_MAX_WORKERS', 'NOT SET')}\n")

    python_dir = Path(__file__).parent
    if str(python_dir) not in sys.path:
        sys.path.insert(0, str(python_dir))


@pytest.fixture(scope="session")
def data_dir():
    """Directory holding the bundled cases and scenarios"""
    override = os.environ.get('GRIDEDGE_DATA_DIR')
    return Path(override) if override else Path(__file__).parent / "gridedge_resilience" / "data"


@pytest.fixture(scope="session")
def case14_path(data_dir):
    return data_dir / "case14.m"


@pytest.fixture(scope="session")
def case9_path(data_dir):
    return data_dir / "case9.m"


@pytest.fixture(scope="session")
def attack_scenario_path(data_dir):
    return data_dir / "ieee14_attack.toml"


@pytest.fixture(scope="session")
def baseline_scenario_path(data_dir):
    return data_dir / "ieee14_baseline.toml"


@pytest.fixture(scope="session")
def wecc_scenario_path(data_dir):
    return data_dir / "wecc9.toml"
