from dataclasses import replace

import pytest

from nnembed.catalog import load_default_catalog
from nnembed.experiments import paper_calibration
from nnembed.oracle import REDUCED_TOPOLOGY
from nnembed.request import build_request
from nnembed.topology import TopologyConfig, build_topology


@pytest.fixture(scope="session")
def catalog():
    return load_default_catalog()


@pytest.fixture(scope="session")
def topology(catalog):
    return build_topology(TopologyConfig(), catalog)


@pytest.fixture(scope="session")
def calibration():
    return paper_calibration()


@pytest.fixture(scope="session")
def request_(calibration, topology):
    return build_request(calibration[1], topology)


@pytest.fixture(scope="session")
def reduced_config(calibration):
    return replace(calibration[0], **REDUCED_TOPOLOGY)


@pytest.fixture(scope="session")
def reduced(catalog, reduced_config, calibration):
    topo = build_topology(reduced_config, catalog)
    return topo, build_request(calibration[1], topo)
