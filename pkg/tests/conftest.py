import json
from pathlib import Path

import numpy as np
import pytest

from pairsolve.model import LevelSet

DATA = Path(__file__).parent / "data"


def load_table(n):
    """Printed reference table as (energies, list of root arrays)."""
    d = json.loads((DATA / f"table{n}.json").read_text())
    E = np.array([r["energy"] for r in d["rows"]])
    roots = [np.array([complex(a, b) for a, b in r["v"]]) for r in d["rows"]]
    return E, roots


@pytest.fixture(scope="session")
def paper8():
    return LevelSet.preset("paper8")


@pytest.fixture(scope="session")
def levels6():
    return LevelSet.preset("paper6")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
