"""Synthetic contact data: Jacobian-transpose torques, sensor noise, datasets.

Torques are gravity-compensated contact residuals: tau = J^T F for the contact
point, so a chain with a fixed base feels contact only through the joints
between the base and the contact link. Chains that declare stance points
(the quadruped preset) additionally balance the contact wrench with
minimum-norm ground reactions at the stance feet; each stance leg feels its
reaction through its own Jacobian. Without that term a torso contact on a
torso-rooted tree would produce no torque anywhere and would be unlearnable.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from prototouch.dataset import NO_CONTACT, Dataset, ProprioSample
from prototouch.kinematics import (
    Joint,
    KinematicChain,
    forward_kinematics,
    home_config,
    point_jacobian,
    reference_points,
    world_point,
)

_MIN_GAIN = 0.01
_SIGMA_PROBE_SEED = 12345
_SIGMA_PROBE_CONFIGS = 24


@dataclass(frozen=True)
class ContactEvent:
    """A single touch: a registered point id or a free (link, local) pair."""

    force: np.ndarray  # Newtons, world frame
    point_id: int | None = None
    link_id: str | None = None
    local_position: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "force", np.asarray(self.force, dtype=float))
        if self.point_id is None and self.link_id is None:
            raise ValueError("contact needs a point_id or a (link_id, local_position) pair")

    def resolve(self, chain: KinematicChain) -> tuple[str, np.ndarray]:
        if self.point_id is not None:
            point = chain.point(self.point_id)
            return point.link_id, point.local_position
        return self.link_id, np.asarray(self.local_position, dtype=float)


@dataclass(frozen=True)
class CollectionProtocol:
    """Knobs of the synthetic collection run; defaults follow the recording
    protocol this pipeline substitutes for (50 configurations, forces varied in
    direction and magnitude, no-contact capture first)."""

    n_configs: int = 50
    reps_per_point: int = 1
    no_contact_fraction: float = 0.3
    noise_sigma_torque: float | None = None  # None: 2% of max |J^T F| over the workspace
    noise_sigma_position: float = 0.002  # rad
    force_min: float = 1.0  # N
    force_max: float = 30.0  # N
    force_cone_deg: float = 60.0  # max tilt away from the inward surface normal
    config_spread: float = 0.4  # rad; joints perturbed around home, clipped to limits
    sample_rate_hz: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if self.n_configs < 1 or self.reps_per_point < 1:
            raise ValueError("counts must be >= 1")
        if not (0.0 <= self.no_contact_fraction <= 1.0):
            raise ValueError("no_contact_fraction must be in [0, 1]")
        if self.noise_sigma_torque is not None and self.noise_sigma_torque < 0:
            raise ValueError("noise_sigma_torque must be >= 0")
        if self.noise_sigma_position < 0:
            raise ValueError("noise_sigma_position must be >= 0")
        if not (0 < self.force_min <= self.force_max):
            raise ValueError("need 0 < force_min <= force_max")
        if self.config_spread < 0:
            raise ValueError("config_spread must be >= 0")


def default_protocol(robot: str, **overrides) -> CollectionProtocol:
    defaults = {
        "spotlike": {"n_configs": 50, "sample_rate_hz": 60.0},
        "frankalike": {"n_configs": 25, "sample_rate_hz": 30.0},
    }
    if robot not in defaults:
        raise ValueError(f"unknown robot {robot!r}")
    params = dict(defaults[robot])
    params.update(overrides)
    return CollectionProtocol(**params)


@dataclass(frozen=True)
class RobotInstance:
    """One physical unit: possibly jittered geometry and per-joint torque gains."""

    chain: KinematicChain
    gains: np.ndarray
    scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=float))
        if self.gains.shape != (self.chain.dof,):
            raise ValueError("one gain per joint required")
        if np.any(self.gains <= 0):
            raise ValueError("gains must be positive")
        if self.scale < 0:
            raise ValueError("scale must be >= 0")


def identity_instance(chain: KinematicChain) -> RobotInstance:
    return RobotInstance(chain=chain, gains=np.ones(chain.dof), scale=0.0, seed=0)


def perturb_instance(chain: KinematicChain, scale: float, seed: int) -> RobotInstance:
    """Instance-to-instance variation: joint origins jittered by N(0, scale*L),
    torque gains by 1 + N(0, scale). scale=0 reproduces the base unit."""
    if scale < 0:
        raise ValueError("scale must be >= 0")
    rng = np.random.default_rng(seed)
    lengths = np.array([float(np.linalg.norm(j.origin[:3, 3])) for j in chain.joints])
    mean_len = float(lengths[lengths > 0].mean()) if np.any(lengths > 0) else 1.0
    joints = []
    for j, length in zip(chain.joints, lengths):
        char_len = length if length > 0 else mean_len
        jitter = rng.normal(0.0, scale * char_len, size=3)
        origin = j.origin.copy()
        origin[:3, 3] += jitter
        joints.append(Joint(j.joint_id, j.parent, j.child, origin, j.axis, j.limits))
    gains = 1.0 + rng.normal(0.0, scale, size=chain.dof)
    gains = np.maximum(gains, _MIN_GAIN)
    perturbed = KinematicChain(
        chain.name, chain.links, joints, chain.surface_points, chain.stance_points
    )
    return RobotInstance(chain=perturbed, gains=gains, scale=scale, seed=seed)


def sample_config(chain: KinematicChain, spread: float, rng) -> np.ndarray:
    """Collection posture: home pose perturbed per joint, clipped to limits.

    Mirrors how postures vary during recording (perturbations around natural
    stances, end-effector kept in the same general area) instead of sampling
    the whole joint space uniformly.
    """
    lo, hi = chain.limits_array()
    home = home_config(chain)
    return rng.uniform(np.maximum(lo, home - spread), np.minimum(hi, home + spread))


def _stance_reactions(chain, poses, wrench):
    """Minimum-norm ground reactions balancing the contact wrench.

    Grasp matrix G stacks [I; [f_i]x] per stance foot; solves G R = -wrench.
    """
    feet = [world_point(chain, None, (sp.link_id, sp.local_position), poses=poses) for sp in chain.stance_points]
    m = len(feet)
    g = np.zeros((6, 3 * m))
    for i, f in enumerate(feet):
        g[:3, 3 * i : 3 * i + 3] = np.eye(3)
        g[3:, 3 * i : 3 * i + 3] = np.array(
            [[0, -f[2], f[1]], [f[2], 0, -f[0]], [-f[1], f[0], 0]]
        )
    reactions, *_ = np.linalg.lstsq(g, -wrench, rcond=None)
    return feet, reactions.reshape(m, 3)


def contact_torques(chain: KinematicChain, q, contact: ContactEvent, poses=None) -> np.ndarray:
    """Noise-free gravity-compensated joint torque residual for one contact."""
    if poses is None:
        poses = forward_kinematics(chain, q)
    link_id, local = contact.resolve(chain)
    force = contact.force
    p = world_point(chain, q, (link_id, local), poses=poses)
    tau = point_jacobian(chain, q, link_id, local, poses=poses).T @ force
    if chain.stance_points:
        wrench = np.concatenate([force, np.cross(p, force)])
        feet, reactions = _stance_reactions(chain, poses, wrench)
        for sp, reaction in zip(chain.stance_points, reactions):
            jac = point_jacobian(chain, q, sp.link_id, sp.local_position, poses=poses)
            tau += jac.T @ reaction
    return tau


def estimate_torque_scale(
    chain: KinematicChain, force: float, spread: float = 0.4, n_configs: int = _SIGMA_PROBE_CONFIGS
) -> float:
    """Max |tau| entry over probe configurations with full inward force."""
    rng = np.random.default_rng(_SIGMA_PROBE_SEED)
    peak = 0.0
    for _ in range(n_configs):
        q = sample_config(chain, spread, rng)
        poses = forward_kinematics(chain, q)
        for point in chain.surface_points:
            normal_w = poses[point.link_id][:3, :3] @ point.normal
            event = ContactEvent(force=-force * normal_w, point_id=point.point_id)
            tau = contact_torques(chain, q, event, poses=poses)
            peak = max(peak, float(np.max(np.abs(tau))))
    return peak


_DEFAULT_NOISE_FRACTION = 0.02  # of the peak workspace torque; see decisions log


def resolve_torque_sigma(chain: KinematicChain, protocol: CollectionProtocol) -> float:
    if protocol.noise_sigma_torque is not None:
        return protocol.noise_sigma_torque
    return _DEFAULT_NOISE_FRACTION * estimate_torque_scale(chain, protocol.force_max, protocol.config_spread)


def _sample_cone_force(rng, inward, cone_rad, f_min, f_max):
    """Force with direction uniform on the spherical cap around `inward`."""
    cos_t = rng.uniform(np.cos(cone_rad), 1.0)
    phi = rng.uniform(0.0, 2.0 * np.pi)
    helper = np.array([1.0, 0.0, 0.0]) if abs(inward[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(inward, helper)
    u /= np.linalg.norm(u)
    v = np.cross(inward, u)
    sin_t = np.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    direction = cos_t * inward + sin_t * (np.cos(phi) * u + np.sin(phi) * v)
    return rng.uniform(f_min, f_max) * direction


def synthesize_dataset(
    chain: KinematicChain,
    points,
    protocol: CollectionProtocol,
    instance: RobotInstance | None = None,
) -> Dataset:
    """Generate a full dataset following the collection protocol.

    Per configuration and point: a fresh force draw, torques through the
    instance's gains plus Gaussian sensor noise, positions with encoder noise,
    ground truth from the instance's true geometry. Extra no-contact samples
    carry p=(0,0,0) and pure-noise torques. Output is seed-deterministic.
    """
    points = list(points)
    if not points:
        raise ValueError("empty point set")
    if instance is None:
        instance = identity_instance(chain)
    true_chain = instance.chain
    rng = np.random.default_rng(protocol.seed)
    sigma_tau = resolve_torque_sigma(chain, protocol)
    sigma_q = protocol.noise_sigma_position
    cone = np.deg2rad(protocol.force_cone_deg)
    dt = 1.0 / protocol.sample_rate_hz
    dof = true_chain.dof

    # Ground-truth labels are the points' static registered coordinates (their
    # home-posture positions on this unit), matching how points are marked
    # once on the body rather than re-derived per configuration.
    static_p = reference_points(true_chain, points)

    samples = []
    for _ in range(protocol.n_configs):
        q_true = sample_config(true_chain, protocol.config_spread, rng)
        poses = forward_kinematics(true_chain, q_true)
        for pi, point in enumerate(points):
            normal_w = poses[point.link_id][:3, :3] @ point.normal
            p = static_p[pi]
            for _ in range(protocol.reps_per_point):
                force = _sample_cone_force(rng, -normal_w, cone, protocol.force_min, protocol.force_max)
                event = ContactEvent(force=force, point_id=point.point_id)
                tau = instance.gains * contact_torques(true_chain, q_true, event, poses=poses)
                tau = tau + rng.normal(0.0, sigma_tau, size=dof)
                q_rec = q_true + rng.normal(0.0, sigma_q, size=dof)
                samples.append(
                    ProprioSample(p=p, q=q_rec, tau=tau, point_id=point.point_id, t=len(samples) * dt)
                )

    n_no_contact = int(round(protocol.no_contact_fraction * len(samples)))
    for _ in range(n_no_contact):
        q_true = sample_config(true_chain, protocol.config_spread, rng)
        tau = rng.normal(0.0, sigma_tau, size=dof)
        q_rec = q_true + rng.normal(0.0, sigma_q, size=dof)
        samples.append(
            ProprioSample(p=np.zeros(3), q=q_rec, tau=tau, point_id=NO_CONTACT, t=len(samples) * dt)
        )

    protocol_used = replace(protocol, noise_sigma_torque=sigma_tau)
    metadata = {
        "protocol": asdict(protocol_used),
        "instance": {"scale": instance.scale, "seed": instance.seed, "gains": instance.gains.tolist()},
        "contact_samples": len(samples) - n_no_contact,
        "no_contact_samples": n_no_contact,
    }
    return Dataset(samples, points, chain.name, dof, metadata)
