import json
import os
from pathlib import Path

import numpy as np
import pytest

import gossip_pca as gp

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_collection_modifyitems(config, items):
    if os.environ.get("GOSSIP_PCA_NIGHTLY"):
        return
    skip = pytest.mark.skip(reason="paper-scale profile; set GOSSIP_PCA_NIGHTLY=1 to run")
    for item in items:
        if "nightly" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def calibration():
    with open(FIXTURES / "calibration.json") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def spiked_200():
    """Gaussian-spiked n=200, l2=0.5: the averaged-estimator test ensemble."""
    m = gp.make_synthetic(200, 0.5, np.random.default_rng(0))
    return m, gp.spectral_oracle(m)


@pytest.fixture(scope="session")
def sign_256():
    """Incoherent (sign-spiked) n=256, l2=0.5: chain-diagnostics ensemble."""
    m = gp.make_synthetic(256, 0.5, np.random.default_rng(31), spike_kind="sign", noise_edge=0.01)
    return m, gp.spectral_oracle(m)


@pytest.fixture(scope="session")
def small_64():
    m = gp.make_synthetic(64, 0.5, np.random.default_rng(12))
    return m, gp.spectral_oracle(m)
