from .base import Attachment, Backend, BackendResponse, Backends, Capability, CapabilityRequest, invoke_structured
from .http import EndpointConfig, HttpBackend
from .sim import SimBackend, SimEnvironment, sim_judge_document, sim_prior_scores, sim_reward, standard_normals

__all__ = [
    "Attachment",
    "Backend",
    "BackendResponse",
    "Backends",
    "Capability",
    "CapabilityRequest",
    "EndpointConfig",
    "HttpBackend",
    "SimBackend",
    "SimEnvironment",
    "invoke_structured",
    "sim_judge_document",
    "sim_prior_scores",
    "sim_reward",
    "standard_normals",
]
