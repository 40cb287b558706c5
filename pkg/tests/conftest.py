import sys
from pathlib import Path

import pytest

# Packages live under src/ and are imported by bare name, as when running `python3 src`.
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
