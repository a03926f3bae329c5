"""Proxy images (segmentation + UV), the software rasterizer that produces
ground-truth proxies, and per-pixel decoding.

Conventions: pixel centers at (x + 0.5, y + 0.5); top-left fill rule for
pixels exactly on an edge; z-buffer with the earlier face winning depth ties;
UV encoded as R=u, G=v, B=255 foreground flag; background is (0,0,0).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .camera import Camera, CropConfig, enlarge_bbox, to_camera_frame
from .errors import InvariantViolation
from .model import BodyModel, PosedMesh
from .palette import DECODE_THRESHOLD, Palette, nearest_part

Z_NEAR = 1e-4


@dataclass(frozen=True)
class Proxy:
    seg: np.ndarray  # (H, W, 3) uint8
    uv: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        if self.seg.shape != self.uv.shape or self.seg.ndim != 3:
            raise InvariantViolation("seg/uv images must share an (H, W, 3) shape")

    @property
    def size(self) -> tuple[int, int]:
        return self.seg.shape[0], self.seg.shape[1]


@dataclass(frozen=True)
class PixelDecode:
    part: int  # part id, -1 for background
    uv: tuple[float, float]
    valid: bool


@dataclass
class RasterBuffers:
    """Per-pixel geometry of a render: winning face, barycentrics, depth."""

    face: np.ndarray  # (H, W) int32, -1 where empty
    bary: np.ndarray  # (H, W, 3) float64
    depth: np.ndarray  # (H, W) float64, +inf where empty


def barycentric_uv(weights, corner_uvs) -> np.ndarray:
    """Interpolate corner UVs with convex weights (la, lb, lc)."""
    w = np.asarray(weights, dtype=np.float64)
    uvs = np.asarray(corner_uvs, dtype=np.float64)
    if w.min() < -1e-9 or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("barycentric weights must be inside the simplex")
    return w @ uvs


def rasterize_buffers(mesh: PosedMesh, cam: Camera) -> RasterBuffers:
    """Z-buffered rasterization of the mesh into per-pixel face/bary/depth.

    Barycentrics are perspective-correct, so they identify the 3D surface
    point whose ray passes through the pixel center.
    """
    H, W = cam.height, cam.width
    face_img = np.full((H, W), -1, dtype=np.int32)
    bary_img = np.zeros((H, W, 3))
    depth_img = np.full((H, W), np.inf)

    pc = to_camera_frame(cam, mesh.vertices)
    z = pc[:, 2]
    ok = z > Z_NEAR
    px = np.zeros((pc.shape[0], 2))
    np.divide(pc[:, 0], z, out=px[:, 0], where=ok)
    np.divide(pc[:, 1], z, out=px[:, 1], where=ok)
    px[:, 0] = cam.fx * px[:, 0] + cam.cx
    px[:, 1] = cam.fy * px[:, 1] + cam.cy

    faces = mesh.model.faces
    tri_ok = ok[faces].all(axis=1)
    for fi in np.flatnonzero(tri_ok):
        va, vb, vc = faces[fi]
        p = px[[va, vb, vc]]
        zinv = 1.0 / z[[va, vb, vc]]

        area2 = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[2, 0] - p[0, 0]) * (p[1, 1] - p[0, 1])
        if area2 == 0.0:
            continue
        orient = 1.0 if area2 > 0 else -1.0
        area2 *= orient

        x_lo = max(0, int(np.ceil(p[:, 0].min() - 0.5)))
        x_hi = min(W - 1, int(np.floor(p[:, 0].max() - 0.5)))
        y_lo = max(0, int(np.ceil(p[:, 1].min() - 0.5)))
        y_hi = min(H - 1, int(np.floor(p[:, 1].max() - 0.5)))
        if x_lo > x_hi or y_lo > y_hi:
            continue
        xs = np.arange(x_lo, x_hi + 1) + 0.5
        ys = np.arange(y_lo, y_hi + 1) + 0.5
        gx, gy = np.meshgrid(xs, ys)

        # Edge functions paired with the opposite vertex; e / area2 = bary.
        edges = ((1, 2), (2, 0), (0, 1))
        cover = np.ones(gx.shape, dtype=bool)
        e = np.empty((3,) + gx.shape)
        for k, (i, j) in enumerate(edges):
            dx, dy = p[j, 0] - p[i, 0], p[j, 1] - p[i, 1]
            ek = orient * ((gx - p[i, 0]) * dy - (gy - p[i, 1]) * dx) * -1.0
            # Top-left rule decides pixels exactly on an edge.
            ddx, ddy = orient * dx, orient * dy
            top_left = (ddy > 0) or (ddy == 0 and ddx < 0)
            cover &= (ek > 0) | ((ek == 0) & top_left)
            e[k] = ek
        if not cover.any():
            continue

        lam_screen = e / area2
        wphi = lam_screen * zinv[:, None, None]
        denom = wphi.sum(axis=0)
        zpix = 1.0 / denom
        lam = wphi * zpix[None]

        sub_y, sub_x = np.nonzero(cover)
        yy, xx = sub_y + y_lo, sub_x + x_lo
        closer = zpix[sub_y, sub_x] < depth_img[yy, xx]
        yy, xx = yy[closer], xx[closer]
        sy, sx = sub_y[closer], sub_x[closer]
        depth_img[yy, xx] = zpix[sy, sx]
        face_img[yy, xx] = fi
        bary_img[yy, xx] = lam[:, sy, sx].T

    return RasterBuffers(face=face_img, bary=bary_img, depth=depth_img)


def encode_uv(u: np.ndarray, v: np.ndarray, foreground: np.ndarray) -> np.ndarray:
    """Float UV in [0,1] -> 8-bit image (R=u, G=v, B=foreground flag)."""
    img = np.zeros(foreground.shape + (3,), dtype=np.uint8)
    img[..., 0] = np.where(foreground, np.rint(np.clip(u, 0, 1) * 255).astype(np.uint8), 0)
    img[..., 1] = np.where(foreground, np.rint(np.clip(v, 0, 1) * 255).astype(np.uint8), 0)
    img[..., 2] = np.where(foreground, 255, 0)
    return img


def proxy_from_buffers(buffers: RasterBuffers, model: BodyModel, palette: Palette) -> Proxy:
    fg = buffers.face >= 0
    face = np.maximum(buffers.face, 0)
    uv = np.einsum("hwk,hwkc->hwc", buffers.bary, model.corner_uvs[face])
    seg = np.zeros(fg.shape + (3,), dtype=np.uint8)
    part = model.face_part[face]
    seg[fg] = palette.colors[part[fg]]
    return Proxy(seg=seg, uv=encode_uv(uv[..., 0], uv[..., 1], fg))


def rasterize(mesh: PosedMesh, model: BodyModel, cam: Camera, palette: Palette) -> Proxy:
    """Render ground-truth segmentation and UV proxy images."""
    if mesh.model is not model:
        raise ValueError("mesh does not belong to the given model")
    return proxy_from_buffers(rasterize_buffers(mesh, cam), model, palette)


def decode_pixel(proxy: Proxy, xy: tuple[int, int], palette: Palette) -> PixelDecode:
    """Decode one pixel: nearest-palette part plus (R/255, G/255) uv."""
    x, y = int(xy[0]), int(xy[1])
    H, W = proxy.size
    if not (0 <= x < W and 0 <= y < H):
        raise ValueError("pixel out of bounds")
    part = int(nearest_part(proxy.seg[y, x], palette))
    uv = (float(proxy.uv[y, x, 0]) / 255.0, float(proxy.uv[y, x, 1]) / 255.0)
    return PixelDecode(part=part, uv=uv, valid=part >= 0)


def decode_seg(
    seg: np.ndarray, palette: Palette, subset: str | None = None, threshold: float = DECODE_THRESHOLD
) -> np.ndarray:
    """Whole-image nearest-palette decode -> (H, W) part ids (-1 background)."""
    return nearest_part(seg, palette, subset=subset, threshold=threshold)


def hand_bboxes(
    proxy: Proxy, palette: Palette, crop: CropConfig | None = None
) -> dict[str, tuple[float, float, float, float]]:
    """Enlarged square boxes around pixels decoding to each hand's parts."""
    crop = crop or CropConfig()
    ids = decode_seg(proxy.seg, palette)
    H, W = proxy.size
    out: dict[str, tuple[float, float, float, float]] = {}
    for side in ("left", "right"):
        side_ids = [
            i for i in palette.hand_ids if palette.names[i].startswith(side + "_")
        ]
        mask = np.isin(ids, side_ids)
        if mask.sum() < crop.min_pixels:
            continue
        ys, xs = np.nonzero(mask)
        tight = (
            float(xs.min()),
            float(ys.min()),
            float(xs.max() - xs.min() + 1),
            float(ys.max() - ys.min() + 1),
        )
        out[side] = enlarge_bbox(tight, crop.factor, W, H)
    return out


# ---------------------------------------------------------------------------
# PNG I/O


def save_proxy(proxy: Proxy, directory: str | Path, stem: str) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for kind, img in (("seg", proxy.seg), ("uv", proxy.uv)):
        p = directory / f"{stem}_{kind}.png"
        Image.fromarray(img, mode="RGB").save(p, format="PNG")
        paths.append(p)
    return paths


def load_proxy(directory: str | Path, stem: str) -> Proxy:
    directory = Path(directory)
    seg = np.asarray(Image.open(directory / f"{stem}_seg.png").convert("RGB"))
    uv = np.asarray(Image.open(directory / f"{stem}_uv.png").convert("RGB"))
    return Proxy(seg=seg, uv=uv)
