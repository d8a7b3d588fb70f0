import numpy as np

import pytest

from lighthash.chain import generate_block_matrix
from lighthash.config import SEED_VARIABLE
from lighthash.data_types import LightHashParams
from lighthash.digest import header_bytes, select_threshold
from lighthash.mesh import random_unitary


@pytest.fixture
def isolated_directory(tmp_path, monkeypatch):
    """
    Run every test in its own empty directory, so no `.lighthash.yml` or
    chain directory of the developer leaks into it.
    """
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(SEED_VARIABLE, raising=False)

    yield tmp_path


@pytest.fixture(scope="session")
def prev_hash():
    return bytes(range(32))


@pytest.fixture(scope="session")
def root_hash():
    return bytes(range(32, 64))


@pytest.fixture(scope="session")
def small_block(prev_hash, root_hash):
    """
    Q, threshold and header of a small N=8, K=4 block.
    """
    block_matrix = generate_block_matrix(prev_hash, root_hash, 8, 4)
    params = LightHashParams(n=8, k=4)
    params = params.with_threshold(select_threshold(block_matrix, params))
    header = header_bytes(1, prev_hash, root_hash, 8, 4, 0, params.t_int)

    return block_matrix, params, header


@pytest.fixture(scope="session")
def unitary_4():
    return random_unitary(4, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
