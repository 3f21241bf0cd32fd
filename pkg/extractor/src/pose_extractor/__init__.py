"""Thin adapter: off-the-shelf pose estimation -> canonical landmark files."""

from .backends import ColorMarkerBackend, MediaPipeBackend, make_backend
from .extract import ExtractorConfig, extract
from .wire import CANONICAL_LANDMARKS, LandmarkWriter

__version__ = "0.1.0"
