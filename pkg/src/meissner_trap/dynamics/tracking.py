"""Synthetic camera frames and intensity-centroid particle tracking."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..validation import check_positive, check_range
from .ringdown import TimeSeries

META_FILE = "meta"


class EmptyRoiError(ValueError):
    pass


@dataclass(frozen=True)
class FrameStack:
    """Frames as an (n, H, W) array of counts."""

    frames: np.ndarray
    frame_rate: float
    pixel_size: float

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=float)
        if f.ndim != 3 or f.shape[0] == 0:
            raise ValueError("frames must have shape (n, H, W)")
        check_positive(self.frame_rate, "frame_rate")
        check_positive(self.pixel_size, "pixel_size")
        object.__setattr__(self, "frames", f)

    def __len__(self):
        return self.frames.shape[0]

    @property
    def shape(self):
        return self.frames.shape[1:]


def render_frames(x_m, y_m, frame_rate: float, pixel_size: float, shape=(64, 64),
                  sigma_px: float = 2.0, peak: float = 4000.0, background: float = 100.0,
                  noise_rms: float = 0.0, seed=None) -> FrameStack:
    """Gaussian spot displaced from the frame centre by ``(x_m, y_m)``."""
    x = np.asarray(x_m, dtype=float) / pixel_size
    y = np.broadcast_to(np.asarray(y_m, dtype=float), x.shape) / pixel_size
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows = np.arange(h)[None, :, None]
    cols = np.arange(w)[None, None, :]
    gx = np.exp(-0.5 * ((cols - cx - x[:, None, None]) / sigma_px) ** 2)
    gy = np.exp(-0.5 * ((rows - cy - y[:, None, None]) / sigma_px) ** 2)
    frames = background + peak * gx * gy
    if noise_rms > 0:
        frames = frames + np.random.default_rng(seed).normal(0.0, noise_rms, frames.shape)
    return FrameStack(frames, frame_rate, pixel_size)


class CentroidTracker(TransformerMixin, BaseEstimator):
    """Intensity-weighted centroid inside a region of interest.

    Parameters
    ----------
    roi : tuple (row0, row1, col0, col1) or None
        Half-open pixel window; ``None`` uses the whole frame.
    background_percentile : float
        Per-frame percentile subtracted before weighting (negatives clamp to 0).

    ``transform`` maps frames (n, H, W) to centroids (n, 2) as ``(x, y)`` in
    full-frame pixel coordinates.
    """

    def __init__(self, roi=None, background_percentile=50.0):
        self.roi = roi
        self.background_percentile = background_percentile

    def fit(self, X=None, y=None):
        check_range(self.background_percentile, "background_percentile", 0.0, 100.0)
        return self

    def transform(self, X):
        frames = np.asarray(X.frames if isinstance(X, FrameStack) else X, dtype=float)
        if frames.ndim == 2:
            frames = frames[None]
        r0, r1, c0, c1 = self.roi or (0, frames.shape[1], 0, frames.shape[2])
        sub = frames[:, r0:r1, c0:c1]
        if sub.size == 0:
            raise EmptyRoiError("region of interest is empty")
        bg = np.percentile(sub, self.background_percentile, axis=(1, 2))
        wgt = np.clip(sub - bg[:, None, None], 0.0, None)
        total = wgt.sum(axis=(1, 2))
        if np.any(total <= 0):
            bad = int(np.flatnonzero(total <= 0)[0])
            raise EmptyRoiError(f"frame {bad}: no signal above background in the roi")
        rows = np.arange(r0, r0 + sub.shape[1], dtype=float)
        cols = np.arange(c0, c0 + sub.shape[2], dtype=float)
        xc = np.einsum("nij,j->n", wgt, cols) / total
        yc = np.einsum("nij,i->n", wgt, rows) / total
        return np.column_stack([xc, yc])


def track_centroid(fs: FrameStack, roi=None, background_percentile: float = 50.0):
    """Track the spot and return ``(x, y)`` TimeSeries in metres about the mean."""
    c = CentroidTracker(roi, background_percentile).fit().transform(fs)
    t = np.arange(len(fs)) / fs.frame_rate
    xy = (c - c.mean(axis=0)) * fs.pixel_size
    return TimeSeries(t, xy[:, 0], fs.frame_rate), TimeSeries(t, xy[:, 1], fs.frame_rate)


# ------------------------------------------------------------------ PGM I/O


def _write_pgm(path: Path, frame: np.ndarray):
    data = np.clip(np.rint(frame), 0, 65535).astype(">u2")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def _read_pgm(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode("ascii"))
        pos = end
    pos += 1  # single whitespace byte before the raster
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(raw, dtype=dtype, count=w * h, offset=pos).reshape(h, w).astype(float)


def write_frame_stack(directory, fs: FrameStack):
    """Write ``frame_00000.pgm ...`` plus a ``meta`` file, atomically per file."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(fs.frames):
        _write_pgm(d / f"frame_{i:05d}.pgm", frame)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".meta")
    with os.fdopen(fd, "w") as fh:
        fh.write(f"frame_rate_hz={fs.frame_rate!r}\npixel_size_m={fs.pixel_size!r}\n")
    os.replace(tmp, d / META_FILE)


def read_frame_stack(directory) -> FrameStack:
    d = Path(directory)
    meta = {}
    for line in (d / META_FILE).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            k, _, v = line.partition("=")
            meta[k.strip()] = float(v)
    files = sorted(d.glob("*.pgm"))
    if not files:
        raise ValueError(f"{d}: no PGM frames")
    return FrameStack(np.stack([_read_pgm(f) for f in files]), meta["frame_rate_hz"],
                      meta["pixel_size_m"])
