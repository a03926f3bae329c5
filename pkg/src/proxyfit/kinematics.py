"""Differentiable skinning forward pass (torch, float64).

This is the single implementation of the posing math. `model.forward` wraps it
for numpy callers; the fitter calls `pose_mesh` directly with parameter tensors
that carry gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .model import BodyModel, PoseParams

DTYPE = torch.float64


def rodrigues(aa: torch.Tensor) -> torch.Tensor:
    """Axis-angle (..., 3) -> rotation matrices (..., 3, 3), autograd-safe at 0."""
    theta_sq = (aa * aa).sum(-1)
    small = theta_sq < 1e-16
    # Substitute 1 under the small branch so both where() branches (and their
    # backward passes) stay finite; the Taylor branch is the one selected there.
    safe_sq = torch.where(small, torch.ones_like(theta_sq), theta_sq)
    theta = torch.sqrt(safe_sq)
    a = torch.where(small, 1.0 - theta_sq / 6.0, torch.sin(theta) / theta)
    b = torch.where(small, 0.5 - theta_sq / 24.0, (1.0 - torch.cos(theta)) / safe_sq)
    x, y, z = aa.unbind(-1)
    zero = torch.zeros_like(x)
    K = torch.stack(
        [
            torch.stack([zero, -z, y], -1),
            torch.stack([z, zero, -x], -1),
            torch.stack([-y, x, zero], -1),
        ],
        -2,
    )
    eye = torch.eye(3, dtype=aa.dtype, device=aa.device).expand(K.shape)
    return eye + a[..., None, None] * K + b[..., None, None] * (K @ K)


@dataclass
class ModelTensors:
    """Torch copies of the BodyModel arrays used by the forward pass."""

    template: torch.Tensor  # (V, 3)
    shape_basis: torch.Tensor  # (V, 3, B)
    joints_regressor: torch.Tensor  # (J, V)
    skinning_weights: torch.Tensor  # (V, J)
    parents: list[int]
    root: int
    theta_joints: list[int]
    hand_joints: dict[str, list[int]]
    hand_mean: dict[str, torch.Tensor]
    hand_components: dict[str, torch.Tensor]
    n_joints: int

    @staticmethod
    def from_model(model: BodyModel) -> "ModelTensors":
        t = lambda x: torch.as_tensor(x, dtype=DTYPE)
        return ModelTensors(
            template=t(model.template_vertices),
            shape_basis=t(model.shape_basis),
            joints_regressor=t(model.joints_regressor),
            skinning_weights=t(model.skinning_weights),
            parents=[int(p) for p in model.kinematic_tree],
            root=int(np.flatnonzero(model.kinematic_tree < 0)[0]),
            theta_joints=list(model.theta_joints),
            hand_joints={s: list(p.joints) for s, p in model.hands.items()},
            hand_mean={s: t(p.mean) for s, p in model.hands.items()},
            hand_components={s: t(p.components) for s, p in model.hands.items()},
            n_joints=model.n_joints,
        )


def joint_rotations(
    mt: ModelTensors,
    theta: torch.Tensor,
    hand_left: torch.Tensor,
    hand_right: torch.Tensor,
) -> torch.Tensor:
    """Assemble the per-joint axis-angle table (J, 3): root stays identity,
    theta rows fill the directly posed joints, hand PCA expands into fingers."""
    rows = [torch.zeros(3, dtype=DTYPE)] * mt.n_joints
    for i, j in enumerate(mt.theta_joints):
        rows[j] = theta[i]
    for side, coeffs in (("left", hand_left), ("right", hand_right)):
        if side not in mt.hand_joints or coeffs.numel() == 0:
            if side in mt.hand_joints:
                flat = mt.hand_mean[side]
                for k, j in enumerate(mt.hand_joints[side]):
                    rows[j] = flat[3 * k : 3 * k + 3]
            continue
        flat = mt.hand_mean[side] + coeffs @ mt.hand_components[side][: coeffs.shape[0]]
        for k, j in enumerate(mt.hand_joints[side]):
            rows[j] = flat[3 * k : 3 * k + 3]
    return torch.stack(rows, 0)


def pose_mesh(
    mt: ModelTensors,
    beta: torch.Tensor,
    theta: torch.Tensor,
    hand_left: torch.Tensor,
    hand_right: torch.Tensor,
    global_rot: torch.Tensor,
    translation: torch.Tensor,
    scale: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Return posed (vertices (V,3), joints (J,3))."""
    shaped = mt.template + torch.einsum("vcb,b->vc", mt.shape_basis, beta)
    j_rest = mt.joints_regressor @ shaped

    aa = joint_rotations(mt, theta, hand_left, hand_right)
    R = rodrigues(aa)  # (J, 3, 3)

    # Forward kinematics: world transform per joint.
    world_R: list[torch.Tensor] = [None] * mt.n_joints  # type: ignore[list-item]
    world_t: list[torch.Tensor] = [None] * mt.n_joints  # type: ignore[list-item]
    order = _topo_order(mt.parents, mt.root)
    for j in order:
        p = mt.parents[j]
        if p < 0:
            world_R[j] = R[j]
            world_t[j] = j_rest[j]
        else:
            world_R[j] = world_R[p] @ R[j]
            world_t[j] = world_R[p] @ (j_rest[j] - j_rest[p]) + world_t[p]
    WR = torch.stack(world_R, 0)  # (J, 3, 3)
    Wt = torch.stack(world_t, 0)  # (J, 3)

    # Linear blend skinning with inverse bind translation folded in.
    skin_t = Wt - torch.einsum("jab,jb->ja", WR, j_rest)
    blend_R = torch.einsum("vj,jab->vab", mt.skinning_weights, WR)
    blend_t = mt.skinning_weights @ skin_t
    verts = torch.einsum("vab,vb->va", blend_R, shaped) + blend_t

    G = rodrigues(global_rot)
    verts = (scale * verts) @ G.T + translation
    joints = (scale * Wt) @ G.T + translation
    return verts, joints


def _topo_order(parents: list[int], root: int) -> list[int]:
    order = [root]
    seen = {root}
    pending = [j for j in range(len(parents)) if j != root]
    while pending:
        rest = []
        for j in pending:
            if parents[j] in seen:
                order.append(j)
                seen.add(j)
            else:
                rest.append(j)
        pending = rest
    return order


def params_to_tensors(model: BodyModel, params: PoseParams) -> dict[str, torch.Tensor]:
    t = lambda x: torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=DTYPE)
    return {
        "beta": t(params.beta),
        "theta": t(params.theta),
        "hand_left": t(params.hand_left),
        "hand_right": t(params.hand_right),
        "global_rot": t(params.global_rot),
        "translation": t(params.translation),
        "scale": t(params.scale),
    }


def forward_numpy(model: BodyModel, params: PoseParams) -> tuple[np.ndarray, np.ndarray]:
    mt = ModelTensors.from_model(model)
    p = params_to_tensors(model, params)
    with torch.no_grad():
        verts, joints = pose_mesh(
            mt,
            p["beta"],
            p["theta"],
            p["hand_left"],
            p["hand_right"],
            p["global_rot"],
            p["translation"],
            p["scale"],
        )
    return verts.numpy(), joints.numpy()
