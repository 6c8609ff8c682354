"""Energy-aware embedding of neural-network service requests on IoT/PON/fog/cloud networks."""

from nnembed.catalog import DeviceCatalog, NetworkProfile, ProcessingProfile, load_default_catalog
from nnembed.topology import PhysicalTopology, TopologyConfig, build_topology
from nnembed.request import NNRequest, RequestConfig, build_request
from nnembed.model import Restriction, build_model, decode, embedding_power

__all__ = [
    "DeviceCatalog",
    "NetworkProfile",
    "ProcessingProfile",
    "load_default_catalog",
    "PhysicalTopology",
    "TopologyConfig",
    "build_topology",
    "NNRequest",
    "RequestConfig",
    "build_request",
    "Restriction",
    "build_model",
    "decode",
    "embedding_power",
]

__version__ = "0.1.0"
