import json
import pathlib
import sys

import numpy as np
import pytest

HERE = pathlib.Path(__file__).parent
sys.path.insert(0, str(HERE))


@pytest.fixture(scope="session")
def oracle():
    return json.loads((HERE / "data" / "oracle_values.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
