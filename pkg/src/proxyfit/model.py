"""Parametric articulated body model: types, skinning forward pass, and file I/O.

The model is a skinned triangle mesh with shape blendshapes, a kinematic tree
posed by per-joint axis-angle rotations, an optional PCA subspace driving the
finger joints of each hand, and a part-segmented per-corner UV atlas. All
arrays are numpy float64 / int64; the model is immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, FileFormatError, InvariantViolation

MODEL_FORMAT = "proxyfit-model/1"


@dataclass(frozen=True)
class HandPCA:
    """PCA subspace over the axis-angle rotations of one hand's finger joints.

    ``joints`` lists the finger joint indices in the order the flattened
    (len(joints)*3,) pose vectors are laid out. ``components`` has one
    principal direction per row.
    """

    joints: tuple[int, ...]
    mean: np.ndarray  # (len(joints)*3,)
    components: np.ndarray  # (P, len(joints)*3)

    @property
    def n_components(self) -> int:
        return int(self.components.shape[0])


@dataclass(frozen=True)
class BodyModel:
    """Skinned template mesh plus everything needed to pose and decode it."""

    template_vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 3) int
    corner_uvs: np.ndarray  # (F, 3, 2) wedge UVs in [0, 1]^2
    face_part: np.ndarray  # (F,) int, index into parts
    parts: tuple[str, ...]
    joints_regressor: np.ndarray  # (J, V)
    kinematic_tree: np.ndarray  # (J,) parent index, -1 for the root
    skinning_weights: np.ndarray  # (V, J), rows sum to 1
    shape_basis: np.ndarray  # (V, 3, B)
    hands: dict[str, HandPCA] = field(default_factory=dict)
    joint_names: tuple[str, ...] = ()

    @property
    def n_vertices(self) -> int:
        return int(self.template_vertices.shape[0])

    @property
    def n_faces(self) -> int:
        return int(self.faces.shape[0])

    @property
    def n_joints(self) -> int:
        return int(self.kinematic_tree.shape[0])

    @property
    def n_shape(self) -> int:
        return int(self.shape_basis.shape[2])

    @property
    def hand_joints(self) -> frozenset[int]:
        """Joints driven by a hand PCA rather than by theta."""
        out: set[int] = set()
        for pca in self.hands.values():
            out.update(pca.joints)
        return frozenset(out)

    @property
    def theta_joints(self) -> tuple[int, ...]:
        """Joints posed directly by PoseParams.theta: all but root and fingers."""
        hand = self.hand_joints
        root = int(np.flatnonzero(self.kinematic_tree < 0)[0])
        return tuple(j for j in range(self.n_joints) if j != root and j not in hand)

    @property
    def wrist_joints(self) -> tuple[int, ...]:
        """Parents of finger chains; the joints the hand-rotation stage moves."""
        hand = self.hand_joints
        wrists = {int(self.kinematic_tree[j]) for j in hand} - set(hand)
        return tuple(sorted(wrists))

    def part_id(self, name: str) -> int:
        return self.parts.index(name)

    def part_faces(self, part: int) -> np.ndarray:
        return np.flatnonzero(self.face_part == part)


@dataclass
class PoseParams:
    """Pose/shape parameters for one subject.

    theta has one axis-angle row per entry of ``model.theta_joints`` (the root
    is excluded; its rotation is ``global_rot``, applied about the origin).
    The posed mesh is ``global_rot @ (scale * lbs(...)) + translation``.
    """

    beta: np.ndarray
    theta: np.ndarray  # (len(theta_joints), 3)
    hand_left: np.ndarray
    hand_right: np.ndarray
    global_rot: np.ndarray  # (3,) axis-angle
    translation: np.ndarray  # (3,)
    scale: float = 1.0

    @staticmethod
    def rest(model: BodyModel) -> "PoseParams":
        nl = model.hands["left"].n_components if "left" in model.hands else 0
        nr = model.hands["right"].n_components if "right" in model.hands else 0
        return PoseParams(
            beta=np.zeros(model.n_shape),
            theta=np.zeros((len(model.theta_joints), 3)),
            hand_left=np.zeros(nl),
            hand_right=np.zeros(nr),
            global_rot=np.zeros(3),
            translation=np.zeros(3),
            scale=1.0,
        )

    def copy(self) -> "PoseParams":
        return PoseParams(
            beta=self.beta.copy(),
            theta=self.theta.copy(),
            hand_left=self.hand_left.copy(),
            hand_right=self.hand_right.copy(),
            global_rot=self.global_rot.copy(),
            translation=self.translation.copy(),
            scale=float(self.scale),
        )

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "theta": self.theta.tolist(),
            "hand_left": self.hand_left.tolist(),
            "hand_right": self.hand_right.tolist(),
            "global_rot": self.global_rot.tolist(),
            "translation": self.translation.tolist(),
            "scale": float(self.scale),
        }

    @staticmethod
    def from_dict(d: dict) -> "PoseParams":
        return PoseParams(
            beta=np.asarray(d["beta"], dtype=np.float64),
            theta=np.asarray(d["theta"], dtype=np.float64).reshape(-1, 3),
            hand_left=np.asarray(d["hand_left"], dtype=np.float64),
            hand_right=np.asarray(d["hand_right"], dtype=np.float64),
            global_rot=np.asarray(d["global_rot"], dtype=np.float64),
            translation=np.asarray(d["translation"], dtype=np.float64),
            scale=float(d["scale"]),
        )


@dataclass(frozen=True)
class PosedMesh:
    """Output of the forward pass; shares faces/uvs/parts with its model."""

    vertices: np.ndarray  # (V, 3)
    joints: np.ndarray  # (J, 3)
    model: BodyModel

    def __post_init__(self):
        if self.vertices.shape[0] != self.model.n_vertices:
            raise DimensionMismatch("posed vertex count does not match model")
        if self.joints.shape[0] != self.model.n_joints:
            raise DimensionMismatch("posed joint count does not match model")


# ---------------------------------------------------------------------------
# Validation


def _uv_triangles_overlap(t1: np.ndarray, t2: np.ndarray, eps: float = 1e-12) -> bool:
    """True if two UV triangles have properly intersecting interiors (SAT)."""
    for tri_a, tri_b in ((t1, t2), (t2, t1)):
        for i in range(3):
            edge = tri_a[(i + 1) % 3] - tri_a[i]
            axis = np.array([-edge[1], edge[0]])
            n = np.linalg.norm(axis)
            if n < eps:
                continue
            axis = axis / n
            pa = tri_a @ axis
            pb = tri_b @ axis
            if pa.max() <= pb.min() + 1e-9 or pb.max() <= pa.min() + 1e-9:
                return False
    return True


def validate_model(model: BodyModel) -> None:
    """Check every BodyModel invariant; raise InvariantViolation on failure."""
    V, J, F = model.n_vertices, model.n_joints, model.n_faces
    if model.faces.min(initial=0) < 0 or model.faces.max(initial=-1) >= V:
        raise InvariantViolation("face indices out of vertex range")
    if model.joints_regressor.shape != (J, V):
        raise InvariantViolation("joints_regressor shape mismatch")
    if model.skinning_weights.shape != (V, J):
        raise InvariantViolation("skinning_weights shape mismatch")

    w = model.skinning_weights
    if w.min(initial=0.0) < -1e-9:
        raise InvariantViolation("skinning weights must be non-negative")
    rowsum = w.sum(axis=1)
    bad = np.flatnonzero(np.abs(rowsum - 1.0) > 1e-6)
    if bad.size:
        raise InvariantViolation(
            f"skinning weight rows must sum to 1 (first bad vertex {bad[0]})"
        )

    roots = np.flatnonzero(model.kinematic_tree < 0)
    if roots.size != 1:
        raise InvariantViolation(f"kinematic tree must have exactly one root, found {roots.size}")
    # Parents must already be visited when walking in index order ensures no cycles
    # only if parent < child; check reachability explicitly instead.
    seen = {int(roots[0])}
    pending = [j for j in range(J) if j != int(roots[0])]
    progress = True
    while pending and progress:
        progress = False
        rest = []
        for j in pending:
            p = int(model.kinematic_tree[j])
            if p in seen:
                seen.add(j)
                progress = True
            else:
                rest.append(j)
        pending = rest
    if pending:
        raise InvariantViolation(f"kinematic tree has cycles or orphans: joints {pending}")

    if model.face_part.min(initial=0) < 0 or model.face_part.max(initial=-1) >= len(model.parts):
        raise InvariantViolation("face_part id not present in the part table")

    uv = model.corner_uvs
    if uv.shape != (F, 3, 2):
        raise InvariantViolation("corner_uvs shape mismatch")
    if uv.min(initial=0.0) < -1e-9 or uv.max(initial=0.0) > 1.0 + 1e-9:
        raise InvariantViolation("corner UVs must lie in [0,1]^2")

    for part in range(len(model.parts)):
        idx = model.part_faces(part)
        tris = uv[idx]
        areas = np.abs(
            (tris[:, 1, 0] - tris[:, 0, 0]) * (tris[:, 2, 1] - tris[:, 0, 1])
            - (tris[:, 2, 0] - tris[:, 0, 0]) * (tris[:, 1, 1] - tris[:, 0, 1])
        )
        if (areas < 1e-12).any():
            raise InvariantViolation(f"part '{model.parts[part]}' has a degenerate uv triangle")
        # Pairwise interior-overlap check within the part; counts are small.
        for a in range(len(idx)):
            box_a = (tris[a].min(axis=0), tris[a].max(axis=0))
            for b in range(a + 1, len(idx)):
                if (tris[b].min(axis=0) > box_a[1]).any() or (tris[b].max(axis=0) < box_a[0]).any():
                    continue
                if _uv_triangles_overlap(tris[a], tris[b]):
                    raise InvariantViolation(
                        f"part '{model.parts[part]}' has overlapping uv triangles "
                        f"(faces {idx[a]} and {idx[b]})"
                    )

    for side, pca in model.hands.items():
        n = len(pca.joints)
        if pca.mean.shape != (n * 3,):
            raise InvariantViolation(f"hand '{side}' mean pose has wrong length")
        if pca.components.ndim != 2 or pca.components.shape[1] != n * 3:
            raise InvariantViolation(f"hand '{side}' components have wrong width")


def check_params(model: BodyModel, params: PoseParams) -> None:
    """Validate that parameter dimensions match the model and are finite."""
    if params.beta.shape != (model.n_shape,):
        raise DimensionMismatch(
            f"beta has {params.beta.shape[0]} coefficients, model expects {model.n_shape}"
        )
    nt = len(model.theta_joints)
    if params.theta.shape != (nt, 3):
        raise DimensionMismatch(f"theta shape {params.theta.shape} != ({nt}, 3)")
    for side, coeffs in (("left", params.hand_left), ("right", params.hand_right)):
        want = model.hands[side].n_components if side in model.hands else 0
        if coeffs.shape != (want,):
            raise DimensionMismatch(f"hand_{side} expects {want} coefficients")
    if params.global_rot.shape != (3,) or params.translation.shape != (3,):
        raise DimensionMismatch("global_rot and translation must be length-3")
    if not np.isfinite(params.scale) or params.scale <= 0:
        raise InvariantViolation("scale must be finite and > 0")
    for name, arr in (
        ("beta", params.beta),
        ("theta", params.theta),
        ("hand_left", params.hand_left),
        ("hand_right", params.hand_right),
        ("global_rot", params.global_rot),
        ("translation", params.translation),
    ):
        if not np.isfinite(arr).all():
            raise InvariantViolation(f"non-finite value in {name}")


# ---------------------------------------------------------------------------
# Forward pass


def expand_hand_pose(model: BodyModel, coeffs: np.ndarray, side: str) -> np.ndarray:
    """Expand hand PCA coefficients to per-finger-joint axis-angles.

    Returns (len(joints), 3); uses the first len(coeffs) components.
    """
    if side not in model.hands:
        raise ValueError(f"unknown hand side '{side}'")
    pca = model.hands[side]
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 1 or coeffs.shape[0] > pca.n_components:
        raise DimensionMismatch(
            f"hand '{side}' accepts at most {pca.n_components} coefficients"
        )
    flat = pca.mean + coeffs @ pca.components[: coeffs.shape[0]]
    return flat.reshape(-1, 3)


def forward(model: BodyModel, params: PoseParams) -> PosedMesh:
    """Pose the model: shape blend, hand PCA expansion, LBS, then
    scale -> global rotation -> translation."""
    from . import kinematics  # local import; torch is heavy

    check_params(model, params)
    verts, joints = kinematics.forward_numpy(model, params)
    return PosedMesh(vertices=verts, joints=joints, model=model)


# ---------------------------------------------------------------------------
# File I/O (single JSON document; nesting is row-major as documented in README)


def save_model(model: BodyModel, path: str | Path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "parts": list(model.parts),
        "joint_names": list(model.joint_names),
        "template_vertices": model.template_vertices.tolist(),
        "faces": model.faces.tolist(),
        "corner_uvs": model.corner_uvs.tolist(),
        "face_part": model.face_part.tolist(),
        "joints_regressor": model.joints_regressor.tolist(),
        "kinematic_tree": model.kinematic_tree.tolist(),
        "skinning_weights": model.skinning_weights.tolist(),
        "shape_basis": model.shape_basis.tolist(),
        "hands": {
            side: {
                "joints": list(pca.joints),
                "mean": pca.mean.tolist(),
                "components": pca.components.tolist(),
            }
            for side, pca in model.hands.items()
        },
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path: str | Path) -> BodyModel:
    """Load and validate a model file; raises FileFormatError / InvariantViolation."""
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FileFormatError(f"cannot parse model file {path}: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FileFormatError(f"{path} is not a {MODEL_FORMAT} document")
    try:
        hands = {
            side: HandPCA(
                joints=tuple(int(j) for j in h["joints"]),
                mean=np.asarray(h["mean"], dtype=np.float64),
                components=np.asarray(h["components"], dtype=np.float64),
            )
            for side, h in doc.get("hands", {}).items()
        }
        model = BodyModel(
            template_vertices=np.asarray(doc["template_vertices"], dtype=np.float64),
            faces=np.asarray(doc["faces"], dtype=np.int64),
            corner_uvs=np.asarray(doc["corner_uvs"], dtype=np.float64),
            face_part=np.asarray(doc["face_part"], dtype=np.int64),
            parts=tuple(doc["parts"]),
            joints_regressor=np.asarray(doc["joints_regressor"], dtype=np.float64),
            kinematic_tree=np.asarray(doc["kinematic_tree"], dtype=np.int64),
            skinning_weights=np.asarray(doc["skinning_weights"], dtype=np.float64),
            shape_basis=np.asarray(doc["shape_basis"], dtype=np.float64),
            hands=hands,
            joint_names=tuple(doc.get("joint_names", [])),
        )
    except (KeyError, ValueError) as e:
        raise FileFormatError(f"model file {path} is missing or has malformed fields: {e}") from e
    validate_model(model)
    return model


def save_obj(vertices: np.ndarray, faces: np.ndarray, path: str | Path) -> None:
    """ASCII OBJ export with v/f records (1-indexed faces)."""
    lines = [f"v {v[0]!r} {v[1]!r} {v[2]!r}" for v in np.asarray(vertices, dtype=np.float64)]
    lines += [f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}" for f in np.asarray(faces, dtype=np.int64)]
    Path(path).write_text("\n".join(lines) + "\n")


def models_equal(a: BodyModel, b: BodyModel) -> bool:
    if a.parts != b.parts or a.joint_names != b.joint_names:
        return False
    pairs = [
        (a.template_vertices, b.template_vertices),
        (a.faces, b.faces),
        (a.corner_uvs, b.corner_uvs),
        (a.face_part, b.face_part),
        (a.joints_regressor, b.joints_regressor),
        (a.kinematic_tree, b.kinematic_tree),
        (a.skinning_weights, b.skinning_weights),
        (a.shape_basis, b.shape_basis),
    ]
    if any(x.shape != y.shape or not np.array_equal(x, y) for x, y in pairs):
        return False
    if set(a.hands) != set(b.hands):
        return False
    for side in a.hands:
        ha, hb = a.hands[side], b.hands[side]
        if ha.joints != hb.joints:
            return False
        if not (np.array_equal(ha.mean, hb.mean) and np.array_equal(ha.components, hb.components)):
            return False
    return True


__all__ = [
    "BodyModel",
    "HandPCA",
    "PoseParams",
    "PosedMesh",
    "expand_hand_pose",
    "forward",
    "validate_model",
    "check_params",
    "save_model",
    "load_model",
    "save_obj",
    "models_equal",
]
