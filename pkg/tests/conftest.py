import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cyltfm import CylinderGeometry, ModeTable, build_eigensystem  # noqa: E402
from cyltfm.model import ChannelModel  # noqa: E402

# Filled by tests/test_acceptance.py, printed at the end of the session.
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def geometry():
    return CylinderGeometry(1.0, 10.0)


@pytest.fixture(scope="session")
def small_es(geometry):
    return build_eigensystem(geometry, ModeTable(2, 3, 6))


@pytest.fixture(scope="session")
def small_model(geometry):
    return ChannelModel.build(geometry, (2, 4, 16))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {msg}")
