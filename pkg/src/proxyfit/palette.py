"""Part-color palette: encoding part ids as RGB, nearest-color decoding,
body/hand subsets, and the left/right mirror table."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvariantViolation

BACKGROUND = (0, 0, 0)
DECODE_THRESHOLD = 40.0  # L2 distance in RGB beyond which a color is rejected
_HAND_SUFFIXES = {"palm", "thumb", "index", "middle", "ring", "pinky"}


@dataclass(frozen=True)
class Palette:
    names: tuple[str, ...]
    colors: np.ndarray  # (P, 3) uint8, ordered by part id
    hand_ids: tuple[int, ...]
    mirror: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        cols = self.colors.astype(np.int64)
        if len(self.names) != cols.shape[0]:
            raise InvariantViolation("palette names/colors length mismatch")
        if (cols.sum(axis=1) == 0).any():
            raise InvariantViolation("background color (0,0,0) reused by a part")
        diff = np.abs(cols[:, None, :] - cols[None, :, :]).max(axis=2)
        np.fill_diagonal(diff, 255)
        if diff.min() < 24:
            raise InvariantViolation("palette colors closer than L-inf 24")

    @property
    def body_ids(self) -> tuple[int, ...]:
        hand = set(self.hand_ids)
        return tuple(i for i in range(len(self.names)) if i not in hand)

    def color_of(self, part: int) -> tuple[int, int, int]:
        return tuple(int(c) for c in self.colors[part])

    def subset_ids(self, subset: str | None) -> np.ndarray:
        """Part ids for 'body', 'hand', or None (all parts)."""
        if subset is None:
            return np.arange(len(self.names))
        if subset == "hand":
            return np.asarray(self.hand_ids, dtype=np.int64)
        if subset == "body":
            return np.asarray(self.body_ids, dtype=np.int64)
        raise ValueError(f"unknown palette subset '{subset}'")

    def to_dict(self) -> dict:
        return {
            "background": list(BACKGROUND),
            "entries": [
                {"id": i, "name": n, "rgb": [int(c) for c in self.colors[i]]}
                for i, n in enumerate(self.names)
            ],
            "hand_ids": list(self.hand_ids),
            "mirror": {str(k): v for k, v in self.mirror.items()},
        }

    @staticmethod
    def from_dict(d: dict) -> "Palette":
        entries = sorted(d["entries"], key=lambda e: e["id"])
        return Palette(
            names=tuple(e["name"] for e in entries),
            colors=np.asarray([e["rgb"] for e in entries], dtype=np.uint8),
            hand_ids=tuple(d["hand_ids"]),
            mirror={int(k): int(v) for k, v in d["mirror"].items()},
        )


def _candidate_colors() -> np.ndarray:
    levels = [0, 51, 102, 153, 204, 255]
    cands = [
        (r, g, b)
        for r in levels
        for g in levels
        for b in levels
        if (r, g, b) != BACKGROUND and r + g + b >= 102
    ]
    return np.asarray(cands, dtype=np.int64)


def build_palette(part_names: list[str] | tuple[str, ...]) -> Palette:
    """Assign maximally separated colors to parts (greedy max-min, seeded by a
    fixed first pick so the assignment is deterministic)."""
    names = tuple(part_names)
    cands = _candidate_colors()
    chosen: list[int] = []
    # Start far from black for visibility.
    first = int(np.flatnonzero((cands == [204, 0, 0]).all(axis=1))[0])
    chosen.append(first)
    dist = np.abs(cands - cands[first]).max(axis=1)
    while len(chosen) < len(names):
        nxt = int(np.argmax(dist))  # argmax takes the first on ties
        if dist[nxt] < 24:
            raise InvariantViolation("cannot build a palette with min distance 24")
        chosen.append(nxt)
        dist = np.minimum(dist, np.abs(cands - cands[nxt]).max(axis=1))
    colors = cands[chosen].astype(np.uint8)

    hand_ids = tuple(
        i
        for i, n in enumerate(names)
        if "_" in n and n.split("_", 1)[0] in ("left", "right") and n.split("_", 1)[1] in _HAND_SUFFIXES
    )
    mirror: dict[int, int] = {}
    index = {n: i for i, n in enumerate(names)}
    for i, n in enumerate(names):
        if n.startswith("left_"):
            other = "right_" + n[len("left_"):]
        elif n.startswith("right_"):
            other = "left_" + n[len("right_"):]
        else:
            continue
        if other in index:
            mirror[i] = index[other]
    return Palette(names=names, colors=colors, hand_ids=hand_ids, mirror=mirror)


def nearest_part(
    pixels: np.ndarray,
    palette: Palette,
    subset: str | None = None,
    threshold: float = DECODE_THRESHOLD,
) -> np.ndarray:
    """Quantize RGB pixels (..., 3) to part ids; -1 where background wins or
    the nearest entry is farther than `threshold` (L2). Ties prefer background,
    then the lowest part id."""
    ids = palette.subset_ids(subset)
    cols = palette.colors[ids].astype(np.float64)
    px = np.asarray(pixels, dtype=np.float64)
    flat = px.reshape(-1, 3)
    # Background is a candidate label alongside the subset entries.
    table = np.concatenate([np.zeros((1, 3)), cols], axis=0)
    d2 = ((flat[:, None, :] - table[None, :, :]) ** 2).sum(axis=2)
    best = np.argmin(d2, axis=1)  # first index on ties: background, then low id
    out = np.where(best == 0, -1, ids[np.maximum(best - 1, 0)])
    reject = np.sqrt(d2[np.arange(flat.shape[0]), best]) > threshold
    out = np.where(reject | (best == 0), -1, out)
    return out.reshape(px.shape[:-1]).astype(np.int32)


def save_palette(p: Palette, path: str | Path) -> None:
    Path(path).write_text(json.dumps(p.to_dict()))


def load_palette(path: str | Path) -> Palette:
    return Palette.from_dict(json.loads(Path(path).read_text()))
