"""Perception backend protocol: wire schema, clients, and deterministic stubs.

Three roles sit behind the same HTTP/JSON contract: a grounder (text query
-> per-frame object boxes + confidence), a segmenter (boxes -> per-object
masks + predicted IoU), and a tracker (keyframe mask -> sequential
propagation sessions). In-process stubs and remote clients are
interchangeable; the pipeline only sees the role interfaces.
"""

from .errors import BackendError, ProtocolError, SchemaError, TransportError
from .schema import (
    CONFIDENCE_LEVELS,
    DEFAULT_PROMPT_TEMPLATE,
    GroundedFrame,
    GroundedObject,
    GroundingResult,
    SegmentationResult,
    SegmentedFrame,
    TrackerSession,
    canonical_dumps,
    confidence_from_level,
    merge_layers,
)
from .client import BackendEndpointConfig, EndpointSpec, HttpGrounder, HttpSegmenter, HttpTracker, build_backends
from .stubs import StubGrounder, StubSegmenter, StubTracker, stub_backends_for_annotations
from .server import StubBackendServer

__all__ = [
    "BackendError",
    "ProtocolError",
    "SchemaError",
    "TransportError",
    "CONFIDENCE_LEVELS",
    "DEFAULT_PROMPT_TEMPLATE",
    "GroundedFrame",
    "GroundedObject",
    "GroundingResult",
    "SegmentationResult",
    "SegmentedFrame",
    "TrackerSession",
    "canonical_dumps",
    "confidence_from_level",
    "merge_layers",
    "BackendEndpointConfig",
    "EndpointSpec",
    "HttpGrounder",
    "HttpSegmenter",
    "HttpTracker",
    "build_backends",
    "StubGrounder",
    "StubSegmenter",
    "StubTracker",
    "stub_backends_for_annotations",
    "StubBackendServer",
]
