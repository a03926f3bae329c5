"""Stochastic proxy corruption: emulates the variability of a generative
proxy predictor (uv noise, left/right label confusion, region-level label
mirroring, foreground dropout) so aggregation and weighting have something
real to clean up."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .palette import Palette
from .proxy import Proxy, decode_seg, encode_uv


@dataclass(frozen=True)
class CorruptionSpec:
    uv_sigma: float = 0.0  # additive Gaussian on uv, in [0,1] units
    label_flip_prob: float = 0.0  # per-pixel left/right mirror
    region_flip_prob: float = 0.0  # per-sample whole-part mirror
    dropout_prob: float = 0.0  # per-pixel foreground -> background
    seed: int = 0

    def __post_init__(self):
        for name in ("label_flip_prob", "region_flip_prob", "dropout_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvariantViolation(f"{name} must be in [0,1]")
        if self.uv_sigma < 0:
            raise InvariantViolation("uv_sigma must be >= 0")

    def to_dict(self) -> dict:
        return {
            "uv_sigma": self.uv_sigma,
            "label_flip_prob": self.label_flip_prob,
            "region_flip_prob": self.region_flip_prob,
            "dropout_prob": self.dropout_prob,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "CorruptionSpec":
        return CorruptionSpec(**d)


def corrupt(
    proxy: Proxy,
    spec: CorruptionSpec,
    sample_index: int,
    palette: Palette,
    stream: int = 0,
) -> Proxy:
    """Corrupt one proxy sample. Deterministic per (spec.seed, stream,
    sample_index); `stream` decorrelates views sharing a sample index.

    Works on decoded fields and re-encodes once, so quantization is applied
    a single time. Background pixels never gain foreground labels. Order:
    region flip, per-pixel label flips, uv noise, dropout.
    """
    rng = np.random.default_rng([spec.seed, stream, sample_index])
    ids = decode_seg(proxy.seg, palette)
    u = proxy.uv[..., 0].astype(np.float64) / 255.0
    v = proxy.uv[..., 1].astype(np.float64) / 255.0
    fg = ids >= 0

    if rng.uniform() < spec.region_flip_prob:
        present = np.unique(ids[fg])
        mirrorable = [p for p in present if int(p) in palette.mirror]
        if mirrorable:
            target = int(rng.choice(mirrorable))
            ids = np.where(ids == target, palette.mirror[target], ids)

    if spec.label_flip_prob > 0:
        flips = (rng.uniform(size=ids.shape) < spec.label_flip_prob) & fg
        flat = ids[flips]
        ids[flips] = [palette.mirror.get(int(p), int(p)) for p in flat]

    if spec.uv_sigma > 0:
        noise = rng.normal(scale=spec.uv_sigma, size=(2,) + ids.shape)
        u = np.where(fg, np.clip(u + noise[0], 0.0, 1.0), u)
        v = np.where(fg, np.clip(v + noise[1], 0.0, 1.0), v)

    if spec.dropout_prob > 0:
        drop = (rng.uniform(size=ids.shape) < spec.dropout_prob) & fg
        ids = np.where(drop, -1, ids)

    fg = ids >= 0
    seg = np.zeros(proxy.seg.shape, dtype=np.uint8)
    seg[fg] = palette.colors[ids[fg]]
    return Proxy(seg=seg, uv=encode_uv(np.where(fg, u, 0.0), np.where(fg, v, 0.0), fg))
