"""Dense descriptor grids and sub-pixel bilinear sampling.

A :class:`FeatureMap` stores an ``Hf x Wf x C`` single-precision grid at a
fixed pixel stride.  Sampling uses normalized coordinates ``(u, v)`` in
``[0, 1]`` (fractions of image width/height) with the half-texel-center
convention: texel ``(i, j)`` sits at ``((j + 0.5)/Wf, (i + 0.5)/Hf)``, and
coordinates outside the texel-center range clamp to the border texels.
The backward pass distributes an upstream gradient onto the (at most) four
corner texels with the interpolation weights — the exact adjoint.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError

PFM1_MAGIC = b"PFM1"


@dataclass(frozen=True)
class FeatureMap:
    """Immutable dense feature grid: ``data[Hf, Wf, C]``, ``stride`` px/texel."""

    data: np.ndarray
    stride: int = 4

    def __post_init__(self):
        d = self.data
        if d.ndim != 3:
            raise InputError(f"feature map must be Hf x Wf x C, got shape {d.shape}")
        if d.shape[0] < 2 or d.shape[1] < 2:
            raise InputError(f"feature map must be at least 2 x 2 texels, got {d.shape[:2]}")
        if self.stride < 1:
            raise InputError(f"stride must be >= 1, got {self.stride}")
        if not np.all(np.isfinite(d)):
            raise InputError("feature map entries must be finite")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def to_normalized(points: np.ndarray, width: float, height: float) -> np.ndarray:
    """Pixel coordinates -> (u, v) fractions of image width/height."""
    if width <= 0 or height <= 0:
        raise InputError(f"image extent must be positive, got {width} x {height}")
    pts = np.asarray(points, dtype=np.float64)
    return pts / np.array([width, height], dtype=np.float64)


def from_normalized(points: np.ndarray, width: float, height: float) -> np.ndarray:
    """Inverse of :func:`to_normalized` (exact round trip)."""
    if width <= 0 or height <= 0:
        raise InputError(f"image extent must be positive, got {width} x {height}")
    pts = np.asarray(points, dtype=np.float64)
    return pts * np.array([width, height], dtype=np.float64)


def _corner_indices(points: np.ndarray, hf: int, wf: int):
    """Corner texel indices and weights for normalized points (N, 2).

    Returns ``(i0, i1, j0, j1, wy, wx)`` where ``wy``/``wx`` weight the
    second corner along each axis.  Out-of-range coordinates clamp to the
    border texel centers, so the weights of the four corners always sum to 1.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise InputError("sample coordinates must be finite")
    gx = np.clip(pts[:, 0] * wf - 0.5, 0.0, wf - 1.0)
    gy = np.clip(pts[:, 1] * hf - 0.5, 0.0, hf - 1.0)
    j0 = np.minimum(np.floor(gx), wf - 2).astype(np.int64)
    i0 = np.minimum(np.floor(gy), hf - 2).astype(np.int64)
    return i0, i0 + 1, j0, j0 + 1, gy - i0, gx - j0


def sample_bilinear_many(data: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Bilinear samples of ``data[Hf, Wf, C]`` at normalized points (N, 2)."""
    hf, wf = data.shape[:2]
    i0, i1, j0, j1, wy, wx = _corner_indices(points, hf, wf)
    wy = wy[:, None].astype(data.dtype)
    wx = wx[:, None].astype(data.dtype)
    top = data[i0, j0] * (1.0 - wx) + data[i0, j1] * wx
    bot = data[i1, j0] * (1.0 - wx) + data[i1, j1] * wx
    return top * (1.0 - wy) + bot * wy


def sample_bilinear(fmap: FeatureMap, point: np.ndarray) -> np.ndarray:
    """Descriptor (length C) at one normalized point."""
    return sample_bilinear_many(fmap.data, np.asarray(point).reshape(1, 2))[0]


def bilinear_weights(points: np.ndarray, hf: int, wf: int) -> tuple[np.ndarray, np.ndarray]:
    """Flattened corner indices (N, 4) into ``Hf*Wf`` and weights (N, 4).

    Weights sum to one per row; corners may coincide at clamped borders.
    """
    i0, i1, j0, j1, wy, wx = _corner_indices(points, hf, wf)
    idx = np.stack([i0 * wf + j0, i0 * wf + j1, i1 * wf + j0, i1 * wf + j1], axis=1)
    w = np.stack(
        [(1 - wy) * (1 - wx), (1 - wy) * wx, wy * (1 - wx), wy * wx], axis=1
    )
    return idx, w


def scatter_bilinear_many(
    grad_buffer: np.ndarray, points: np.ndarray, upstream: np.ndarray
) -> None:
    """Accumulate upstream gradients (N, C) into ``grad_buffer[Hf, Wf, C]``.

    Exact adjoint of :func:`sample_bilinear_many`; accumulation runs in the
    buffer's dtype (use float64 buffers for double-precision reduction).
    """
    hf, wf, c = grad_buffer.shape
    up = np.asarray(upstream)
    if up.ndim != 2 or up.shape[1] != c:
        raise InputError(f"upstream gradient must be (N, {c}), got {up.shape}")
    idx, w = bilinear_weights(points, hf, wf)
    contrib = w[:, :, None] * up[:, None, :]
    flat = np.bincount(
        (idx[:, :, None] * c + np.arange(c)[None, None, :]).ravel(),
        weights=contrib.astype(np.float64).ravel(),
        minlength=hf * wf * c,
    )
    grad_buffer += flat.reshape(hf, wf, c).astype(grad_buffer.dtype)


def sample_bilinear_backward(
    fmap: FeatureMap, point: np.ndarray, upstream: np.ndarray
) -> list[tuple[int, int, np.ndarray]]:
    """Gradient of one sample w.r.t. texel values.

    Returns the sparse per-texel gradients as ``(row, col, grad)`` triples
    covering at most four texels; the weights sum to one per channel.
    """
    up = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if up.shape[0] != fmap.channels:
        raise InputError(f"upstream gradient must have length {fmap.channels}")
    idx, w = bilinear_weights(np.asarray(point).reshape(1, 2), fmap.height, fmap.width)
    out: dict[tuple[int, int], np.ndarray] = {}
    for k in range(4):
        rc = (int(idx[0, k]) // fmap.width, int(idx[0, k]) % fmap.width)
        grad = w[0, k] * up
        if rc in out:
            out[rc] = out[rc] + grad
        else:
            out[rc] = grad
    return [(r, c, g) for (r, c), g in sorted(out.items())]


def upsample_bilinear(data: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample ``data[Hf, Wf, C]`` onto an ``out_h x out_w`` pixel grid.

    Output pixel ``(i, j)`` is the bilinear sample at its own center
    ``((j + 0.5)/out_w, (i + 0.5)/out_h)`` — the same convention as
    :func:`sample_bilinear_many`, factored separably for speed.
    """
    hf, wf = data.shape[:2]
    gx = np.clip((np.arange(out_w) + 0.5) * (wf / out_w) - 0.5, 0.0, wf - 1.0)
    gy = np.clip((np.arange(out_h) + 0.5) * (hf / out_h) - 0.5, 0.0, hf - 1.0)
    j0 = np.minimum(np.floor(gx), wf - 2).astype(np.int64)
    i0 = np.minimum(np.floor(gy), hf - 2).astype(np.int64)
    wx = (gx - j0).astype(data.dtype)[None, :, None]
    wy = (gy - i0).astype(data.dtype)[:, None, None]
    rows = data[i0] * (1.0 - wy) + data[i0 + 1] * wy
    return rows[:, j0] * (1.0 - wx) + rows[:, j0 + 1] * wx


def upsample_bilinear_backward(upstream: np.ndarray, hf: int, wf: int) -> np.ndarray:
    """Adjoint of :func:`upsample_bilinear`: scatter (H, W, C) back to (Hf, Wf, C)."""
    out_h, out_w, c = upstream.shape
    gx = np.clip((np.arange(out_w) + 0.5) * (wf / out_w) - 0.5, 0.0, wf - 1.0)
    gy = np.clip((np.arange(out_h) + 0.5) * (hf / out_h) - 0.5, 0.0, hf - 1.0)
    j0 = np.minimum(np.floor(gx), wf - 2).astype(np.int64)
    i0 = np.minimum(np.floor(gy), hf - 2).astype(np.int64)
    wx = (gx - j0)[None, :, None]
    wy = (gy - i0)[:, None, None]
    up = upstream.astype(np.float64)
    rows = np.zeros((out_h, wf, c), dtype=np.float64)
    np.add.at(rows, (slice(None), j0), up * (1.0 - wx))
    np.add.at(rows, (slice(None), j0 + 1), up * wx)
    grad = np.zeros((hf, wf, c), dtype=np.float64)
    np.add.at(grad, i0, rows * (1.0 - wy))
    np.add.at(grad, i0 + 1, rows * wy)
    return grad


# ---------------------------------------------------------------------------
# PFM1 file format: magic "PFM1", u32 Hf, u32 Wf, u32 C, u32 stride, then
# Hf*Wf*C float32 row-major, all little-endian.
# ---------------------------------------------------------------------------


def save_feature_map(path: str | Path, fmap: FeatureMap) -> None:
    hf, wf, c = fmap.data.shape
    header = PFM1_MAGIC + struct.pack("<4I", hf, wf, c, fmap.stride)
    body = np.ascontiguousarray(fmap.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + body)


def load_feature_map(path: str | Path) -> FeatureMap:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != PFM1_MAGIC:
        raise FormatError(f"{path}: not a PFM1 feature map (bad magic)")
    hf, wf, c, stride = struct.unpack("<4I", raw[4:20])
    expected = 20 + hf * wf * c * 4
    if len(raw) != expected:
        raise FormatError(f"{path}: PFM1 payload size mismatch (expected {expected} bytes, got {len(raw)})")
    data = np.frombuffer(raw, dtype="<f4", offset=20).reshape(hf, wf, c).astype(np.float32)
    return FeatureMap(data=data, stride=int(stride))
