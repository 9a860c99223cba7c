"""Two-view epipolar geometry.

Fundamental matrices from known relative pose, epipolar lines, point-line
distances, line clipping against the image rectangle, and the two-valued
epipolar reward.  Everything here is computed in double precision regardless
of the feature math's dtype: line clipping and the fundamental-matrix
construction are conditioning-sensitive.

Coordinate convention (shared by the whole package): a pixel point is
``(u, v)`` with ``u`` horizontal and ``v`` vertical, the image rectangle is
``[0, W] x [0, H]``, and the sample stored at row ``i``, column ``j`` sits at
``(j + 0.5, i + 0.5)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .errors import DegenerateLineError, DegeneratePoseError, FormatError, InputError


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def validate(self) -> "Intrinsics":
        if not (self.fx > 0 and self.fy > 0):
            raise InputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not all(np.isfinite(v) for v in (self.fx, self.fy, self.cx, self.cy)):
            raise InputError("intrinsics must be finite")
        return self

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]], dtype=np.float64
        )

    @staticmethod
    def from_matrix(k: np.ndarray) -> "Intrinsics":
        k = np.asarray(k, dtype=np.float64)
        return Intrinsics(fx=float(k[0, 0]), fy=float(k[1, 1]), cx=float(k[0, 2]), cy=float(k[1, 2]))


@dataclass(frozen=True)
class RelativePose:
    """Rigid motion taking camera-1 coordinates to camera-2 coordinates.

    ``x_cam2 = R @ x_cam1 + t``; the translation scale is arbitrary.
    """

    R: np.ndarray
    t: np.ndarray

    def validate(self, tol: float = 1e-9) -> "RelativePose":
        r = np.asarray(self.R, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        if r.shape != (3, 3) or t.shape != (3,):
            raise InputError(f"pose shapes must be (3,3) and (3,), got {r.shape} and {t.shape}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise InputError("pose entries must be finite")
        if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
            raise InputError("R is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > tol:
            raise InputError("det(R) differs from 1 by more than 1e-9")
        if np.linalg.norm(t) == 0.0:
            raise DegeneratePoseError("translation must be nonzero to define an epipolar constraint")
        return self


@dataclass(frozen=True)
class FundamentalMatrix:
    """Rank-2 matrix mapping image-1 pixels to image-2 epipolar lines."""

    F: np.ndarray

    def validate(self, rank_tol: float = 1e-8) -> "FundamentalMatrix":
        f = np.asarray(self.F, dtype=np.float64)
        if f.shape != (3, 3) or not np.all(np.isfinite(f)):
            raise InputError("F must be a finite 3x3 matrix")
        s = np.linalg.svd(f, compute_uv=False)
        if s[0] == 0.0 or s[2] >= rank_tol * s[0]:
            raise InputError("F must have rank 2 (smallest singular value < 1e-8 x largest)")
        return self


@dataclass(frozen=True)
class EpipolarLine:
    """Normalized line ``a*u + b*v + c = 0`` with ``a**2 + b**2 = 1``.

    The sign is fixed (``c <= 0`` when ``|c| > 1e-12``, else ``b >= 0``, else
    ``a > 0``) so that equal lines have bit-equal coefficients.
    """

    a: float
    b: float
    c: float


@dataclass(frozen=True)
class LineSegment:
    """Visible portion of a line inside the image rectangle."""

    p0: np.ndarray
    p1: np.ndarray

    def length(self) -> float:
        return float(np.linalg.norm(np.asarray(self.p1) - np.asarray(self.p0)))


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ w == np.cross(v, w)``."""
    v = np.asarray(v, dtype=np.float64).reshape(3)
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]], dtype=np.float64
    )


def fundamental_from_pose(k1: Intrinsics, k2: Intrinsics, pose: RelativePose) -> FundamentalMatrix:
    """Fundamental matrix of a calibrated pair with known relative pose.

    Satisfies ``x2^T F x1 = 0`` for pixel projections ``x1``, ``x2`` of any
    3D point visible in both views.  The result is scaled to unit Frobenius
    norm so downstream numbers are reproducible.
    """
    k1.validate()
    k2.validate()
    pose.validate()
    r = np.asarray(pose.R, dtype=np.float64)
    t = np.asarray(pose.t, dtype=np.float64).reshape(3)
    essential = skew(t) @ r
    f = np.linalg.inv(k2.matrix()).T @ essential @ np.linalg.inv(k1.matrix())
    norm = np.linalg.norm(f)
    if norm == 0.0:
        raise DegeneratePoseError("fundamental matrix vanished; degenerate pose")
    return FundamentalMatrix(F=f / norm)


def _normalize_line(coeffs: np.ndarray, origin_norm: float) -> EpipolarLine:
    a, b, c = (float(x) for x in coeffs)
    n2 = float(np.hypot(a, b))
    full = float(np.linalg.norm(coeffs))
    if full <= 1e-12 * max(origin_norm, 1.0):
        raise DegenerateLineError("line coefficients vanish (point is the epipole)")
    if n2 <= 1e-12 * full:
        raise DegenerateLineError("line has no finite direction (line at infinity)")
    a, b, c = a / n2, b / n2, c / n2
    if abs(c) > 1e-12:
        if c > 0:
            a, b, c = -a, -b, -c
    elif b < 0 or (b == 0 and a < 0):
        a, b, c = -a, -b, -c
    return EpipolarLine(a=a, b=b, c=c)


def epipolar_line(f: FundamentalMatrix, x: np.ndarray) -> EpipolarLine:
    """Epipolar line in image 2 of pixel point ``x`` in image 1."""
    x = np.asarray(x, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(x)):
        raise InputError("query point must be finite")
    fm = np.asarray(f.F, dtype=np.float64)
    coeffs = fm @ np.array([x[0], x[1], 1.0])
    return _normalize_line(coeffs, origin_norm=float(np.linalg.norm(fm)) * float(np.linalg.norm([x[0], x[1], 1.0])))


def point_line_distance(line: EpipolarLine, y: np.ndarray) -> float:
    """Unsigned pixel distance from ``y`` to the normalized line."""
    y = np.asarray(y, dtype=np.float64).reshape(2)
    return float(abs(line.a * y[0] + line.b * y[1] + line.c))


def point_line_distances(line: EpipolarLine, ys: np.ndarray) -> np.ndarray:
    """Vectorized :func:`point_line_distance` over an (N, 2) array."""
    ys = np.asarray(ys, dtype=np.float64).reshape(-1, 2)
    return np.abs(ys[:, 0] * line.a + ys[:, 1] * line.b + line.c)


def clip_line_to_image(line: EpipolarLine, width: float, height: float) -> LineSegment | None:
    """Intersect a normalized line with ``[0, W] x [0, H]``.

    Returns ``None`` when the intersection is empty or shorter than one
    pixel.  Endpoints are ordered along the direction ``(b, -a)`` so equal
    inputs always produce identical segments.
    """
    if width <= 0 or height <= 0:
        raise InputError(f"image extent must be positive, got {width} x {height}")
    a, b, c = line.a, line.b, line.c
    # Point on the line closest to the origin, direction of unit length.
    px, py = -a * c, -b * c
    dx, dy = b, -a
    t_lo, t_hi = -np.inf, np.inf
    for p, d, hi in ((px, dx, width), (py, dy, height)):
        if abs(d) < 1e-15:
            if p < 0.0 or p > hi:
                return None
            continue
        t0, t1 = (0.0 - p) / d, (hi - p) / d
        if t0 > t1:
            t0, t1 = t1, t0
        t_lo, t_hi = max(t_lo, t0), min(t_hi, t1)
    if not np.isfinite(t_lo) or not np.isfinite(t_hi) or t_hi - t_lo < 1.0:
        return None
    p0 = np.array([px + dx * t_lo, py + dy * t_lo], dtype=np.float64)
    p1 = np.array([px + dx * t_hi, py + dy * t_hi], dtype=np.float64)
    # Clamp away roundoff so endpoints sit inside the rectangle exactly.
    p0 = np.clip(p0, [0.0, 0.0], [width, height])
    p1 = np.clip(p1, [0.0, 0.0], [width, height])
    return LineSegment(p0=p0, p1=p1)


def epipolar_reward(distance: float, cfg: TrainConfig) -> float:
    """Two-valued reward: ``lambda_p`` iff ``distance <= epsilon`` (inclusive)."""
    if distance < 0:
        raise InputError(f"distance must be >= 0, got {distance}")
    return cfg.lambda_p if distance <= cfg.epsilon else cfg.lambda_n


def epipolar_rewards(distances: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    """Vectorized :func:`epipolar_reward`."""
    d = np.asarray(distances, dtype=np.float64)
    return np.where(d <= cfg.epsilon, cfg.lambda_p, cfg.lambda_n)


# ---------------------------------------------------------------------------
# Pose file format: JSON object with keys "K1", "K2" (3x3), "R" (3x3),
# "t" (length 3).  Matrices may be nested rows or flat row-major lists.
# ---------------------------------------------------------------------------


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape == (9,):
        arr = arr.reshape(3, 3)
    if arr.shape != (3, 3):
        raise FormatError(f"pose key {name!r} must be 3x3 (nested or flat row-major)")
    return arr


def load_pose(path: str | Path) -> tuple[Intrinsics, Intrinsics, RelativePose]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read pose file {path}: {exc}") from exc
    missing = {"K1", "K2", "R", "t"} - set(data)
    if missing:
        raise FormatError(f"pose file {path} missing keys: {sorted(missing)}")
    k1 = Intrinsics.from_matrix(_as_matrix(data["K1"], "K1")).validate()
    k2 = Intrinsics.from_matrix(_as_matrix(data["K2"], "K2")).validate()
    t = np.asarray(data["t"], dtype=np.float64).reshape(-1)
    if t.shape != (3,):
        raise FormatError(f"pose key 't' must have length 3, got shape {t.shape}")
    pose = RelativePose(R=_as_matrix(data["R"], "R"), t=t)
    return k1, k2, pose


def save_pose(path: str | Path, k1: Intrinsics, k2: Intrinsics, pose: RelativePose) -> None:
    payload = {
        "K1": k1.matrix().tolist(),
        "K2": k2.matrix().tolist(),
        "R": np.asarray(pose.R, dtype=np.float64).tolist(),
        "t": np.asarray(pose.t, dtype=np.float64).reshape(3).tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
