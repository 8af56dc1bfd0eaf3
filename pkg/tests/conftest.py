import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

A4 = 0.140989


@pytest.fixture(scope="session")
def cert4():
    from annulus_bifurcation.crossing import find_crossing

    return find_crossing(4)
