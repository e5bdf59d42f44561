from pathlib import Path

import numpy as np
import pytest

from docdp import EmbeddingTable, load_embeddings

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def table_ab():
    return EmbeddingTable({"a": [0.0, 0.0], "b": [3.0, 4.0]})


@pytest.fixture
def toy1d():
    return load_embeddings(FIXTURES / "toy1d.txt")


@pytest.fixture
def toy3d():
    return load_embeddings(FIXTURES / "toy3d.txt")


@pytest.fixture
def line01():
    """The two-word line {a=0, b=1}."""
    return EmbeddingTable({"a": [0.0], "b": [1.0]})


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

