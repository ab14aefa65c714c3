"""Kinematic trees of revolute joints: world poses, surface points, point Jacobians.

A chain is a rooted tree of links connected by revolute joints. Every pose is a
4x4 homogeneous transform; the base link frame is the world frame. Chains are
immutable after construction and all operations here are pure functions, so
they are safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

PRESET_NAMES = ("spotlike", "frankalike")

_AXIS_NORM_TOL = 1e-9


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit axis."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    cc = 1.0 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Fixed-axis roll/pitch/yaw rotation, applied as Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def make_transform(xyz, rpy=(0.0, 0.0, 0.0)) -> np.ndarray:
    t = np.eye(4)
    t[:3, :3] = rpy_matrix(*rpy)
    t[:3, 3] = xyz
    return t


@dataclass(frozen=True)
class Joint:
    joint_id: str
    parent: str
    child: str
    origin: np.ndarray  # 4x4 transform in the parent-link frame
    axis: np.ndarray  # rotation axis in the joint frame (unit)
    limits: tuple[float, float]  # radians, inclusive


@dataclass(frozen=True)
class SurfacePoint:
    point_id: int
    link_id: str
    local_position: np.ndarray  # meters, link frame
    normal: np.ndarray  # outward unit normal, link frame


@dataclass(frozen=True)
class StancePoint:
    """Ground-contact anchor used by the stance reaction model (quadrupeds)."""

    link_id: str
    local_position: np.ndarray


class JointConfig:
    """Joint angle vector validated against a chain's limits at construction."""

    __slots__ = ("q",)

    def __init__(self, chain: "KinematicChain", q):
        q = np.asarray(q, dtype=float)
        if q.shape != (chain.dof,):
            raise ValueError(f"expected {chain.dof} joint angles, got shape {q.shape}")
        for j, angle in zip(chain.joints, q):
            lo, hi = j.limits
            if not (lo <= angle <= hi):
                raise ValueError(
                    f"joint {j.joint_id!r}: angle {angle:.6f} outside limits [{lo}, {hi}]"
                )
        self.q = q


def _as_angles(chain: "KinematicChain", q) -> np.ndarray:
    if isinstance(q, JointConfig):
        return q.q
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise ValueError(f"expected {chain.dof} joint angles, got shape {q.shape}")
    return q


class KinematicChain:
    """Rooted tree of links and revolute joints.

    The base link is the unique link that is not any joint's child. Joint order
    (and hence the layout of q and tau vectors) is the declaration order.
    """

    def __init__(self, name, links, joints, surface_points=(), stance_points=()):
        self.name = name
        self.links = list(links)
        self.joints = list(joints)
        self.surface_points = list(surface_points)
        self.stance_points = list(stance_points)
        self.dof = len(self.joints)

        link_ids = [lid for lid, _ in self.links]
        children = {j.child for j in self.joints}
        roots = [lid for lid in link_ids if lid not in children]
        self.base_link = roots[0] if roots else None

        self._joint_index = {j.joint_id: i for i, j in enumerate(self.joints)}
        self._parent_joint = {j.child: i for i, j in enumerate(self.joints)}
        self._points_by_id = {p.point_id: p for p in self.surface_points}

    def config(self, q) -> JointConfig:
        return JointConfig(self, q)

    def joint_index(self, joint_id: str) -> int:
        return self._joint_index[joint_id]

    def point(self, point_id: int) -> SurfacePoint:
        try:
            return self._points_by_id[point_id]
        except KeyError:
            raise KeyError(f"unknown surface point id {point_id}") from None

    def has_link(self, link_id: str) -> bool:
        return any(lid == link_id for lid, _ in self.links)

    def path_to(self, link_id: str) -> list[int]:
        """Joint indices on the path from the base to link_id, base side first."""
        if not self.has_link(link_id):
            raise KeyError(f"unknown link {link_id!r}")
        path = []
        current = link_id
        while current != self.base_link:
            ji = self._parent_joint.get(current)
            if ji is None:
                break  # orphan link; validate_chain reports it
            path.append(ji)
            current = self.joints[ji].parent
        path.reverse()
        return path

    def limits_array(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([j.limits[0] for j in self.joints])
        hi = np.array([j.limits[1] for j in self.joints])
        return lo, hi


@dataclass
class ValidationReport:
    ok: bool
    violations: list[str] = field(default_factory=list)


def validate_chain(chain: KinematicChain) -> ValidationReport:
    """Structural check: rooted tree, unit axes, sane limits. Never raises."""
    violations = []
    link_ids = [lid for lid, _ in chain.links]
    link_set = set(link_ids)
    if len(link_set) != len(link_ids):
        violations.append("duplicate link ids")

    children = {}
    for j in chain.joints:
        if j.parent not in link_set:
            violations.append(f"joint {j.joint_id!r}: unknown parent link {j.parent!r}")
        if j.child not in link_set:
            violations.append(f"joint {j.joint_id!r}: unknown child link {j.child!r}")
        if j.child in children:
            violations.append(f"link {j.child!r} has multiple parent joints")
        children[j.child] = j.parent
        norm = float(np.linalg.norm(j.axis))
        if abs(norm - 1.0) > _AXIS_NORM_TOL:
            violations.append(f"joint {j.joint_id!r}: non-unit axis (norm {norm:.6g})")
        lo, hi = j.limits
        if not (lo <= hi):
            violations.append(f"joint {j.joint_id!r}: bad limits [{lo}, {hi}]")

    roots = [lid for lid in link_ids if lid not in children]
    if len(roots) != 1:
        violations.append(f"expected exactly one base link, found {len(roots)}")

    # Cycle / orphan detection: walk each link toward the base.
    base = roots[0] if len(roots) == 1 else None
    for lid in link_ids:
        seen = set()
        current = lid
        while current in children:
            if current in seen:
                violations.append(f"cycle through link {current!r}")
                break
            seen.add(current)
            current = children[current]
        else:
            if base is not None and current != base:
                violations.append(f"orphan link {lid!r} not connected to base")

    for p in chain.surface_points:
        if p.link_id not in link_set:
            violations.append(f"surface point {p.point_id}: unknown link {p.link_id!r}")
    ids = [p.point_id for p in chain.surface_points]
    if ids and (sorted(ids) != list(range(len(ids)))):
        violations.append("surface point ids not dense in [0, n)")
    for sp in chain.stance_points:
        if sp.link_id not in link_set:
            violations.append(f"stance point on unknown link {sp.link_id!r}")

    return ValidationReport(ok=not violations, violations=violations)


def forward_kinematics(chain: KinematicChain, q) -> dict[str, np.ndarray]:
    """World pose of every link; the base link pose is the identity."""
    angles = _as_angles(chain, q)
    poses = {chain.base_link: np.eye(4)}
    pending = list(enumerate(chain.joints))
    # Joints are usually declared parents-first; loop until settled to be safe.
    while pending:
        remaining = []
        for ji, j in pending:
            parent_pose = poses.get(j.parent)
            if parent_pose is None:
                remaining.append((ji, j))
                continue
            t = parent_pose @ j.origin
            t = t.copy()
            t[:3, :3] = t[:3, :3] @ rotation_about_axis(j.axis, angles[ji])
            poses[j.child] = t
        if len(remaining) == len(pending):
            raise ValueError("chain is not a connected tree; run validate_chain")
        pending = remaining
    return poses


def world_point(chain: KinematicChain, q, point, poses=None) -> np.ndarray:
    """World position of a surface point (or any (link_id, local) pair)."""
    if isinstance(point, SurfacePoint):
        link_id, local = point.link_id, point.local_position
    else:
        link_id, local = point
    if poses is None:
        poses = forward_kinematics(chain, q)
    try:
        t = poses[link_id]
    except KeyError:
        raise KeyError(f"unknown link {link_id!r}") from None
    return t[:3, :3] @ np.asarray(local, dtype=float) + t[:3, 3]


def point_jacobian(chain: KinematicChain, q, link_id: str, local_point, poses=None) -> np.ndarray:
    """3 x dof positional Jacobian of a point fixed to link_id.

    Column j is axis_j x (p - o_j) for joints on the base-to-link path and zero
    elsewhere.
    """
    if poses is None:
        poses = forward_kinematics(chain, q)
    p = world_point(chain, q, (link_id, local_point), poses=poses)
    jac = np.zeros((3, chain.dof))
    for ji in chain.path_to(link_id):
        j = chain.joints[ji]
        # Frame of the joint before its own rotation: parent pose @ origin.
        pre = poses[j.parent] @ j.origin
        axis_w = pre[:3, :3] @ j.axis
        origin_w = pre[:3, 3]
        jac[:, ji] = np.cross(axis_w, p - origin_w)
    return jac


def home_config(chain: KinematicChain) -> np.ndarray:
    """Mid-range angle for every joint (a valid, well-conditioned posture)."""
    lo, hi = chain.limits_array()
    return (lo + hi) / 2.0


def random_config(chain: KinematicChain, rng: np.random.Generator) -> np.ndarray:
    lo, hi = chain.limits_array()
    return rng.uniform(lo, hi)


def reference_points(chain: KinematicChain, points=None) -> np.ndarray:
    """Static registered coordinates of the sampled points: their world
    positions at the home posture. These are the localization targets."""
    if points is None:
        points = chain.surface_points
    q_ref = home_config(chain)
    poses = forward_kinematics(chain, q_ref)
    return np.array([world_point(chain, q_ref, p, poses=poses) for p in points])


def chain_reach(chain: KinematicChain, n_configs: int = 128, seed: int = 0) -> float:
    """Max distance of any surface point from the base over sampled postures."""
    rng = np.random.default_rng(seed)
    reach = 0.0
    for _ in range(n_configs):
        q = random_config(chain, rng)
        poses = forward_kinematics(chain, q)
        for p in chain.surface_points:
            reach = max(reach, float(np.linalg.norm(world_point(chain, q, p, poses=poses))))
    return reach


# ---------------------------------------------------------------------------
# Chain description files (JSON)


def chain_from_dict(data: dict, name: str = "") -> KinematicChain:
    links = [(entry["id"], entry.get("name", entry["id"])) for entry in data["links"]]
    joints = []
    for entry in data["joints"]:
        origin = entry.get("origin", {})
        joints.append(
            Joint(
                joint_id=entry["id"],
                parent=entry["parent"],
                child=entry["child"],
                origin=make_transform(origin.get("xyz", (0, 0, 0)), origin.get("rpy", (0, 0, 0))),
                axis=np.asarray(entry["axis"], dtype=float),
                limits=(float(entry["limits"][0]), float(entry["limits"][1])),
            )
        )
    points = []
    for entry in data.get("surface_points", []):
        local = np.asarray(entry["xyz"], dtype=float)
        if "normal" in entry:
            normal = np.asarray(entry["normal"], dtype=float)
        else:
            # Fall back to treating the link origin as interior.
            norm = np.linalg.norm(local)
            normal = local / norm if norm > 0 else np.array([1.0, 0.0, 0.0])
        points.append(
            SurfacePoint(
                point_id=int(entry["id"]),
                link_id=entry["link"],
                local_position=local,
                normal=normal,
            )
        )
    stance = [
        StancePoint(link_id=entry["link"], local_position=np.asarray(entry["xyz"], dtype=float))
        for entry in data.get("stance_points", [])
    ]
    return KinematicChain(
        name=data.get("robot", name),
        links=links,
        joints=joints,
        surface_points=points,
        stance_points=stance,
    )


def chain_to_dict(chain: KinematicChain) -> dict:
    def origin_fields(t: np.ndarray) -> dict:
        r = t[:3, :3]
        # Recover fixed-axis rpy from the rotation matrix.
        pitch = math.asin(max(-1.0, min(1.0, -r[2, 0])))
        if abs(math.cos(pitch)) > 1e-9:
            roll = math.atan2(r[2, 1], r[2, 2])
            yaw = math.atan2(r[1, 0], r[0, 0])
        else:
            roll = math.atan2(-r[1, 2], r[1, 1])
            yaw = 0.0
        return {"xyz": [float(v) for v in t[:3, 3]], "rpy": [roll, pitch, yaw]}

    return {
        "robot": chain.name,
        "links": [{"id": lid, "name": name} for lid, name in chain.links],
        "joints": [
            {
                "id": j.joint_id,
                "parent": j.parent,
                "child": j.child,
                "origin": origin_fields(j.origin),
                "axis": [float(v) for v in j.axis],
                "limits": [j.limits[0], j.limits[1]],
            }
            for j in chain.joints
        ],
        "surface_points": [
            {
                "id": p.point_id,
                "link": p.link_id,
                "xyz": [float(v) for v in p.local_position],
                "normal": [float(v) for v in p.normal],
            }
            for p in chain.surface_points
        ],
        "stance_points": [
            {"link": sp.link_id, "xyz": [float(v) for v in sp.local_position]}
            for sp in chain.stance_points
        ],
    }


def load_chain(path) -> KinematicChain:
    with open(path) as fh:
        data = json.load(fh)
    chain = chain_from_dict(data)
    report = validate_chain(chain)
    if not report.ok:
        raise ValueError(f"invalid chain file {path}: " + "; ".join(report.violations))
    return chain


def save_chain(chain: KinematicChain, path) -> None:
    with open(path, "w") as fh:
        json.dump(chain_to_dict(chain), fh, indent=1)
        fh.write("\n")


def preset_chain(name: str) -> KinematicChain:
    """Load one of the shipped presets: 'spotlike' (19 dof) or 'frankalike' (7 dof)."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    ref = resources.files("prototouch.presets").joinpath(f"{name}.chain.json")
    data = json.loads(ref.read_text())
    chain = chain_from_dict(data, name=name)
    report = validate_chain(chain)
    if not report.ok:
        raise ValueError(f"corrupt preset {name!r}: " + "; ".join(report.violations))
    return chain
