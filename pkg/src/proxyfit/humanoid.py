"""Procedural desk-scale humanoid generator.

Builds a self-contained articulated body: one rectangular segment box per
joint, 24+ body parts plus 12 hand parts (two palms, ten fingers), a
part-disjoint UV atlas, smooth synthetic shape blendshapes, and a seeded
hand PCA basis over finger curls. Deterministic given the config.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ProxyfitError
from .model import BodyModel, HandPCA

FINGER_NAMES = ("thumb", "index", "middle", "ring", "pinky")


@dataclass(frozen=True)
class HumanoidConfig:
    vertex_budget: int = 1500
    body_parts: int = 24
    finger_segments: int = 3
    shape_coeffs: int = 10
    hand_components: int = 6
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "vertex_budget": self.vertex_budget,
            "body_parts": self.body_parts,
            "finger_segments": self.finger_segments,
            "shape_coeffs": self.shape_coeffs,
            "hand_components": self.hand_components,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "HumanoidConfig":
        return HumanoidConfig(**d)


@dataclass
class _Box:
    """One skinned segment: a rectangular prism from `base` toward `tip`."""

    joint: int
    part: int
    base: np.ndarray
    tip: np.ndarray
    half_v: float
    half_w: float
    level: int = 1  # subdivision per face edge

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.tip - self.base))

    @property
    def volume(self) -> float:
        return self.length * self.half_v * self.half_w

    def frame(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        u = (self.tip - self.base) / self.length
        ref = np.array([0.0, 1.0, 0.0]) if abs(u[1]) < 0.9 else np.array([0.0, 0.0, 1.0])
        v = np.cross(ref, u)
        v = v / np.linalg.norm(v)
        w = np.cross(u, v)
        return u, v, w


def _skeleton(cfg: HumanoidConfig) -> tuple[list[str], list[str], dict]:
    """Part names, joint names, and the geometric layout tables."""
    n_spine = cfg.body_parts - 20  # pelvis + spines + 19 fixed parts = body_parts
    if n_spine < 1:
        raise ProxyfitError(f"body_parts must be >= 21, got {cfg.body_parts}")
    spine_names = [f"spine{i + 1}" for i in range(n_spine)]
    body = (
        ["pelvis"]
        + spine_names
        + ["neck", "head", "jaw", "left_eye", "right_eye"]
        + ["left_collar", "left_upper_arm", "left_forearm"]
        + ["right_collar", "right_upper_arm", "right_forearm"]
        + ["left_thigh", "left_shin", "left_foot", "left_toes"]
        + ["right_thigh", "right_shin", "right_foot", "right_toes"]
    )
    assert len(body) == cfg.body_parts
    parts = list(body) + ["left_palm", "right_palm"]
    for side in ("left", "right"):
        parts += [f"{side}_{f}" for f in FINGER_NAMES]

    joints = list(body) + ["left_wrist", "right_wrist"]
    for side in ("left", "right"):
        for f in FINGER_NAMES:
            joints += [f"{side}_{f}_{s + 1}" for s in range(cfg.finger_segments)]

    layout = {"spine_names": spine_names, "n_spine": n_spine}
    return parts, joints, layout


def make_procedural_humanoid(config: HumanoidConfig | None = None) -> BodyModel:
    cfg = config or HumanoidConfig()
    parts, joint_names, layout = _skeleton(cfg)
    part_of = {name: i for i, name in enumerate(parts)}
    joint_of = {name: i for i, name in enumerate(joint_names)}
    n_joints = len(joint_names)
    S = cfg.finger_segments

    parent = np.full(n_joints, -1, dtype=np.int64)

    def set_parent(child: str, par: str) -> None:
        parent[joint_of[child]] = joint_of[par]

    spine = layout["spine_names"]
    set_parent(spine[0], "pelvis")
    for a, b in zip(spine[1:], spine[:-1]):
        set_parent(a, b)
    top = spine[-1]
    set_parent("neck", top)
    set_parent("head", "neck")
    for name in ("jaw", "left_eye", "right_eye"):
        set_parent(name, "head")
    for side in ("left", "right"):
        set_parent(f"{side}_collar", top)
        set_parent(f"{side}_upper_arm", f"{side}_collar")
        set_parent(f"{side}_forearm", f"{side}_upper_arm")
        set_parent(f"{side}_wrist", f"{side}_forearm")
        set_parent(f"{side}_thigh", "pelvis")
        set_parent(f"{side}_shin", f"{side}_thigh")
        set_parent(f"{side}_foot", f"{side}_shin")
        set_parent(f"{side}_toes", f"{side}_foot")
        for f in FINGER_NAMES:
            set_parent(f"{side}_{f}_1", f"{side}_wrist")
            for s in range(1, S):
                set_parent(f"{side}_{f}_{s + 1}", f"{side}_{f}_{s}")

    boxes = _layout_boxes(cfg, part_of, joint_of, layout)
    _assign_subdivision(cfg, boxes)

    verts, faces, corner_uvs, face_part, axial, vert_joint = _emit_mesh(boxes, len(parts))
    V = verts.shape[0]

    # Skinning: rigid per segment with a small blend toward the parent joint
    # near the segment base, so posing stretches rather than tears.
    weights = np.zeros((V, n_joints))
    blen = np.array([b.length for b in boxes])
    for i in range(V):
        b = boxes[vert_joint[i]]
        j = b.joint
        p = parent[j]
        if p < 0:
            weights[i, j] = 1.0
            continue
        zone = 0.25 * blen[vert_joint[i]]
        wp = 0.3 * max(0.0, 1.0 - axial[i] / zone) if zone > 0 else 0.0
        weights[i, j] = 1.0 - wp
        weights[i, p] = wp

    # Joint regressor: uniform average of each segment's base-face vertices,
    # whose centroid coincides with the joint pivot by construction.
    regressor = np.zeros((n_joints, V))
    for bi, b in enumerate(boxes):
        base_ids = np.flatnonzero((vert_joint == bi) & (axial < 1e-12))
        regressor[b.joint, base_ids] = 1.0 / base_ids.size

    shape_basis = _make_shape_basis(cfg, verts)
    hands = _make_hand_pca(cfg, joint_of)

    model = BodyModel(
        template_vertices=verts,
        faces=faces,
        corner_uvs=corner_uvs,
        face_part=face_part,
        parts=tuple(parts),
        joints_regressor=regressor,
        kinematic_tree=parent,
        skinning_weights=weights,
        shape_basis=shape_basis,
        hands=hands,
        joint_names=tuple(joint_names),
    )
    return model


def _layout_boxes(cfg, part_of, joint_of, layout) -> list[_Box]:
    S = cfg.finger_segments
    spine = layout["spine_names"]
    boxes: list[_Box] = []

    def add(part: str, joint: str, base, tip, hv, hw):
        boxes.append(
            _Box(
                joint=joint_of[joint],
                part=part_of[part],
                base=np.asarray(base, dtype=np.float64),
                tip=np.asarray(tip, dtype=np.float64),
                half_v=hv,
                half_w=hw,
            )
        )

    add("pelvis", "pelvis", (0, 0.95, 0), (0, 1.06, 0), 0.15, 0.10)
    y0, y1 = 1.06, 1.50
    n = len(spine)
    for i, name in enumerate(spine):
        a = y0 + (y1 - y0) * i / n
        b = y0 + (y1 - y0) * (i + 1) / n
        add(name, name, (0, a, 0), (0, b, 0), 0.14, 0.095)
    add("neck", "neck", (0, 1.50, 0), (0, 1.57, 0), 0.045, 0.045)
    add("head", "head", (0, 1.57, 0), (0, 1.76, 0), 0.09, 0.10)
    add("jaw", "jaw", (0, 1.60, 0.10), (0, 1.575, 0.135), 0.04, 0.02)
    add("left_eye", "left_eye", (0.035, 1.685, 0.10), (0.035, 1.685, 0.13), 0.013, 0.013)
    add("right_eye", "right_eye", (-0.035, 1.685, 0.10), (-0.035, 1.685, 0.13), 0.013, 0.013)

    for side, sx in (("left", 1.0), ("right", -1.0)):
        ay = 1.44
        add(f"{side}_collar", f"{side}_collar", (sx * 0.02, ay, 0), (sx * 0.11, ay, 0), 0.040, 0.045)
        add(f"{side}_upper_arm", f"{side}_upper_arm", (sx * 0.11, ay, 0), (sx * 0.375, ay, 0), 0.042, 0.042)
        add(f"{side}_forearm", f"{side}_forearm", (sx * 0.375, ay, 0), (sx * 0.63, ay, 0), 0.036, 0.036)
        add(f"{side}_palm", f"{side}_wrist", (sx * 0.63, ay, 0), (sx * 0.72, ay, 0), 0.045, 0.012)
        for fi, f in enumerate(FINGER_NAMES):
            z = -0.036 + 0.018 * fi
            for s in range(S):
                xa = 0.72 + 0.033 * s
                xb = 0.72 + 0.033 * (s + 1)
                add(
                    f"{side}_{f}",
                    f"{side}_{f}_{s + 1}",
                    (sx * xa, ay, z),
                    (sx * xb, ay, z),
                    0.0075,
                    0.0070,
                )
        add(f"{side}_thigh", f"{side}_thigh", (sx * 0.09, 0.95, 0), (sx * 0.09, 0.52, 0), 0.070, 0.075)
        add(f"{side}_shin", f"{side}_shin", (sx * 0.09, 0.52, 0), (sx * 0.09, 0.10, 0), 0.050, 0.055)
        add(f"{side}_foot", f"{side}_foot", (sx * 0.09, 0.10, 0), (sx * 0.09, 0.055, 0.095), 0.045, 0.030)
        add(f"{side}_toes", f"{side}_toes", (sx * 0.09, 0.055, 0.095), (sx * 0.09, 0.05, 0.155), 0.045, 0.022)

    return boxes


def _assign_subdivision(cfg: HumanoidConfig, boxes: list[_Box]) -> None:
    minimum = 24 * len(boxes)  # 6 faces x 4 verts at level 1
    if cfg.vertex_budget < minimum:
        raise ProxyfitError(
            f"vertex budget {cfg.vertex_budget} too small: "
            f"{len(boxes)} segments need at least {minimum} vertices"
        )
    budget = cfg.vertex_budget - minimum
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i].volume, i))
    for i in order:
        extra = 6 * 9 - 24  # level 2 cost over level 1
        if budget >= extra:
            boxes[i].level = 2
            budget -= extra


def _emit_mesh(boxes: list[_Box], n_parts: int):
    verts: list[np.ndarray] = []
    faces: list[tuple[int, int, int]] = []
    corner_uvs: list[np.ndarray] = []
    face_part: list[int] = []
    axial: list[float] = []
    vert_box: list[int] = []

    part_rows = np.zeros(n_parts, dtype=np.int64)
    for b in boxes:
        part_rows[b.part] += 2  # two uv rows of three cells per box
    next_row = np.zeros(n_parts, dtype=np.int64)

    margin = 0.012
    for bi, b in enumerate(boxes):
        u, v, w = b.frame()
        L, hv, hw = b.length, b.half_v, b.half_w
        k = b.level
        # Each face: (origin, edge_p, edge_q, axial at (p, q))
        face_specs = [
            (b.base - v * hv - w * hw, 2 * hv * v, 2 * hw * w, lambda p, q: 0.0),
            (b.base + u * L - v * hv - w * hw, 2 * hv * v, 2 * hw * w, lambda p, q: L),
            (b.base + v * hv - w * hw, u * L, 2 * hw * w, lambda p, q: p * L),
            (b.base - v * hv - w * hw, u * L, 2 * hw * w, lambda p, q: p * L),
            (b.base - v * hv + w * hw, u * L, 2 * hv * v, lambda p, q: p * L),
            (b.base - v * hv - w * hw, u * L, 2 * hv * v, lambda p, q: p * L),
        ]
        rows_total = part_rows[b.part]
        for fi, (origin, ep, eq, ax_fn) in enumerate(face_specs):
            row = next_row[b.part] + fi // 3
            col = fi % 3
            x0, x1 = col / 3 + margin, (col + 1) / 3 - margin
            y0, y1 = row / rows_total + margin, (row + 1) / rows_total - margin

            base_idx = len(verts)
            for i in range(k + 1):
                for j in range(k + 1):
                    p, q = i / k, j / k
                    verts.append(origin + ep * p + eq * q)
                    axial.append(ax_fn(p, q))
                    vert_box.append(bi)

            def vid(i, j):
                return base_idx + i * (k + 1) + j

            def uv(i, j):
                return np.array([x0 + (x1 - x0) * i / k, y0 + (y1 - y0) * j / k])

            for i in range(k):
                for j in range(k):
                    faces.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
                    corner_uvs.append(np.stack([uv(i, j), uv(i + 1, j), uv(i + 1, j + 1)]))
                    face_part.append(b.part)
                    faces.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
                    corner_uvs.append(np.stack([uv(i, j), uv(i + 1, j + 1), uv(i, j + 1)]))
                    face_part.append(b.part)
        next_row[b.part] += 2

    return (
        np.asarray(verts),
        np.asarray(faces, dtype=np.int64),
        np.asarray(corner_uvs),
        np.asarray(face_part, dtype=np.int64),
        np.asarray(axial),
        np.asarray(vert_box, dtype=np.int64),
    )


def _make_shape_basis(cfg: HumanoidConfig, verts: np.ndarray) -> np.ndarray:
    V = verts.shape[0]
    B = cfg.shape_coeffs
    basis = np.zeros((V, 3, B))
    if B == 0:
        return basis
    ylo, yhi = verts[:, 1].min(), verts[:, 1].max()
    rel_h = (verts[:, 1] - ylo) / (yhi - ylo)
    basis[:, 1, 0] = 0.06 * rel_h  # taller
    if B > 1:
        basis[:, 0, 1] = 0.04 * verts[:, 0]  # girth
        basis[:, 2, 1] = 0.04 * verts[:, 2]
    rng = np.random.default_rng(cfg.seed)
    for b in range(2, B):
        freq = rng.uniform(1.5, 5.0, size=3)
        phase = rng.uniform(0, 2 * np.pi, size=3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        field = np.sin(verts @ freq + phase.sum())
        basis[:, :, b] = 0.02 * field[:, None] * direction[None, :]
    return basis


def _make_hand_pca(cfg: HumanoidConfig, joint_of: dict) -> dict[str, HandPCA]:
    S = cfg.finger_segments
    P = cfg.hand_components
    rng = np.random.default_rng(cfg.seed + 1)
    hands: dict[str, HandPCA] = {}
    for side in ("left", "right"):
        joints = tuple(
            joint_of[f"{side}_{f}_{s + 1}"] for f in FINGER_NAMES for s in range(S)
        )
        n = len(joints)
        mean = np.zeros(n * 3)
        for k in range(n):
            s = k % S
            mean[3 * k + 2] = -0.08 * (1.0 + 0.3 * s)  # slight rest curl
        raw = np.zeros((P, n * 3))
        for p in range(P):
            per_finger = rng.normal(size=len(FINGER_NAMES))
            for fi in range(len(FINGER_NAMES)):
                for s in range(S):
                    k = fi * S + s
                    curl = per_finger[fi] * (0.5 + 0.5 * s / max(S - 1, 1))
                    raw[p, 3 * k + 2] = curl
            raw[p] += 0.1 * rng.normal(size=n * 3)
        # Orthonormal rows with a deterministic sign convention.
        q, _ = np.linalg.qr(raw.T)
        comps = q.T[:P]
        for p in range(P):
            imax = int(np.argmax(np.abs(comps[p])))
            if comps[p, imax] < 0:
                comps[p] = -comps[p]
        hands[side] = HandPCA(joints=joints, mean=mean, components=comps)
    return hands
