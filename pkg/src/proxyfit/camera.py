"""Perspective cameras: projection, hand-crop derivation, and rig sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InvariantViolation


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    R: np.ndarray  # (3, 3) world-to-camera rotation
    t: np.ndarray  # (3,)
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvariantViolation("focal lengths must be positive")
        R = np.asarray(self.R, dtype=np.float64)
        if R.shape != (3, 3):
            raise InvariantViolation("R must be 3x3")
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-8 or abs(np.linalg.det(R) - 1.0) > 1e-8:
            raise InvariantViolation("R must be orthonormal with det +1")

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "R": np.asarray(self.R).tolist(),
            "t": np.asarray(self.t).tolist(),
            "width": self.width,
            "height": self.height,
        }

    @staticmethod
    def from_dict(d: dict) -> "Camera":
        return Camera(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            R=np.asarray(d["R"], dtype=np.float64),
            t=np.asarray(d["t"], dtype=np.float64),
            width=int(d["width"]),
            height=int(d["height"]),
        )


def to_camera_frame(cam: Camera, points: np.ndarray) -> np.ndarray:
    """World points (..., 3) -> camera frame."""
    pts = np.asarray(points, dtype=np.float64)
    return pts @ np.asarray(cam.R).T + np.asarray(cam.t)


def project(cam: Camera, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project world points (..., 3) -> (pixels (..., 2), depth (...)).

    Depth is the camera-frame z; callers must treat z <= 0 as behind the
    camera. Raises if any point sits on the camera plane (|z| <= 1e-9).
    """
    pc = to_camera_frame(cam, points)
    z = pc[..., 2]
    if (np.abs(z) <= 1e-9).any():
        raise ValueError("point on the camera plane cannot be projected")
    px = np.stack(
        [cam.fx * pc[..., 0] / z + cam.cx, cam.fy * pc[..., 1] / z + cam.cy], axis=-1
    )
    return px, z


def crop_camera(cam: Camera, bbox: tuple[float, float, float, float], out_size: int) -> Camera:
    """Camera whose image is `bbox` (x, y, w, h in pixels) resampled to
    out_size x out_size. Extrinsics unchanged."""
    x, y, w, h = (float(v) for v in bbox)
    if w <= 0 or h <= 0:
        raise ValueError("bbox must have positive area")
    if x < 0 or y < 0 or x + w > cam.width + 1e-9 or y + h > cam.height + 1e-9:
        raise ValueError("bbox must lie within the image")
    sx, sy = out_size / w, out_size / h
    return replace(
        cam,
        fx=cam.fx * sx,
        fy=cam.fy * sy,
        cx=(cam.cx - x) * sx,
        cy=(cam.cy - y) * sy,
        width=out_size,
        height=out_size,
    )


@dataclass(frozen=True)
class CropConfig:
    """Hand-crop policy: enlarge the tight bbox, square, clamped to the image."""

    factor: float = 2.2
    out_size: int = 256
    min_pixels: int = 8


def enlarge_bbox(
    tight: tuple[float, float, float, float], factor: float, width: int, height: int
) -> tuple[float, float, float, float]:
    """Square box `factor` times the tight box's longer side, shifted to stay
    inside the image (side capped at the image's shorter dimension)."""
    x, y, w, h = tight
    side = min(factor * max(w, h), float(min(width, height)))
    cx, cy = x + w / 2, y + h / 2
    nx = min(max(cx - side / 2, 0.0), width - side)
    ny = min(max(cy - side / 2, 0.0), height - side)
    return (nx, ny, side, side)


def look_at(eye: np.ndarray, target: np.ndarray, up=(0.0, 1.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """World-to-camera (R, t) with +z forward and +y down the image."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd = fwd / np.linalg.norm(fwd)
    x = np.cross(fwd, np.asarray(up, dtype=np.float64))
    n = np.linalg.norm(x)
    if n < 1e-9:
        raise ValueError("camera forward direction is parallel to up")
    x = x / n
    y = np.cross(fwd, x)
    R = np.stack([x, y, fwd])
    if np.linalg.det(R) < 0:
        x = -x
        R = np.stack([x, np.cross(fwd, x), fwd])
    return R, -R @ eye


def sample_rig(
    n_views: int,
    radius: float = 3.5,
    seed: int = 0,
    target=(0.0, 0.95, 0.0),
    image_size: int = 256,
    focal: float = 300.0,
) -> list[Camera]:
    """Randomized ring of inward-looking cameras; deterministic per seed."""
    if n_views < 1:
        raise ValueError("n_views must be >= 1")
    rng = np.random.default_rng(seed)
    target = np.asarray(target, dtype=np.float64)
    cams = []
    for v in range(n_views):
        az = 2 * np.pi * v / n_views + rng.uniform(-0.15, 0.15)
        r = radius * (1.0 + rng.uniform(-0.08, 0.08))
        height = target[1] + rng.uniform(-0.2, 0.45)
        eye = np.array([r * np.sin(az), height, r * np.cos(az)])
        R, t = look_at(eye, target)
        f = focal * (1.0 + rng.uniform(-0.08, 0.08))
        cams.append(
            Camera(
                fx=f,
                fy=f,
                cx=image_size / 2,
                cy=image_size / 2,
                R=R,
                t=t,
                width=image_size,
                height=image_size,
            )
        )
    return cams


def save_cameras(cams: list[Camera], path: str | Path) -> None:
    Path(path).write_text(json.dumps([c.to_dict() for c in cams]))


def load_cameras(path: str | Path) -> list[Camera]:
    return [Camera.from_dict(d) for d in json.loads(Path(path).read_text())]
