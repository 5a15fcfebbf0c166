"""Ringdown simulation and fitting, PSD estimation and centroid tracking."""

from .ringdown import (
    FitNotConvergedError,
    NoOscillationError,
    RingdownFit,
    RingdownFitter,
    TimeSeries,
    UndersampledError,
    detect_release,
    fit_ringdown,
    quality_factor,
    ringdown_model,
    simulate_ringdown,
)
from .spectral import TooShortError, psd
from .tracking import (
    CentroidTracker,
    EmptyRoiError,
    FrameStack,
    read_frame_stack,
    render_frames,
    track_centroid,
    write_frame_stack,
)

__all__ = [
    "FitNotConvergedError", "NoOscillationError", "RingdownFit", "RingdownFitter", "TimeSeries",
    "UndersampledError", "detect_release", "fit_ringdown", "quality_factor", "ringdown_model",
    "simulate_ringdown", "TooShortError", "psd", "CentroidTracker", "EmptyRoiError",
    "FrameStack", "read_frame_stack", "render_frames", "track_centroid", "write_frame_stack",
]
