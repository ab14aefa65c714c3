"""Sample tuples, dataset container, normalization, class encoding, and file IO.

A sample couples the ground-truth contact location p with the joint position
and torque vectors (q, tau). No-contact is encoded as p = (0,0,0) and
point_id = NO_CONTACT. Datasets are immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from prototouch.kinematics import (
    KinematicChain,
    SurfacePoint,
    preset_chain,
    reference_points,
)

NO_CONTACT = -1

SCHEMA = "proprio-v1"

DEFAULT_ENCODE_TOL = 0.02  # meters; absorbs float noise, synthetic points are exact


class SchemaError(ValueError):
    """Raised when a dataset file is malformed or inconsistent."""


@dataclass(frozen=True)
class ProprioSample:
    p: np.ndarray  # 3-vector, meters, world/base frame; (0,0,0) = no contact
    q: np.ndarray  # dof joint positions, radians
    tau: np.ndarray  # dof joint torques, N*m
    point_id: int = NO_CONTACT
    t: float = 0.0  # seconds, for replay streams

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float))
        if self.q.shape != self.tau.shape:
            raise ValueError("q and tau must have the same length")
        is_origin = bool(np.all(self.p == 0.0))
        if (self.point_id == NO_CONTACT) != is_origin:
            raise ValueError("point_id == NO_CONTACT iff p == (0,0,0)")


class Dataset:
    """Immutable collection of samples plus the sampled-point registry."""

    def __init__(self, samples, points, robot_id: str, dof: int, metadata: dict | None = None):
        self.samples: list[ProprioSample] = list(samples)
        self.points: list[SurfacePoint] = list(points)
        self.robot_id = robot_id
        self.dof = dof
        self.metadata = dict(metadata or {})
        n = len(self.points)
        for i, s in enumerate(self.samples):
            if len(s.q) != dof:
                raise ValueError(f"sample {i}: expected dof {dof}, got {len(s.q)}")
            if s.point_id != NO_CONTACT and not (0 <= s.point_id < n):
                raise ValueError(f"sample {i}: point_id {s.point_id} outside [0, {n})")

    def __len__(self):
        return len(self.samples)

    @property
    def n_points(self) -> int:
        return len(self.points)

    def inputs(self) -> np.ndarray:
        """k x 2*dof matrix of [q; tau] rows, the model input order."""
        return np.array([np.concatenate([s.q, s.tau]) for s in self.samples])

    def targets(self) -> np.ndarray:
        return np.array([s.p for s in self.samples])

    def labels(self) -> np.ndarray:
        """Class indices; the no-contact class is n."""
        n = self.n_points
        return np.array([n if s.point_id == NO_CONTACT else s.point_id for s in self.samples])

    def subset(self, indices) -> "Dataset":
        return Dataset(
            [self.samples[i] for i in indices],
            self.points,
            self.robot_id,
            self.dof,
            self.metadata,
        )


@dataclass(frozen=True)
class NormalizationStats:
    """Per-dimension extrema of the concatenated [q; tau] input."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", np.asarray(self.min, dtype=float))
        object.__setattr__(self, "max", np.asarray(self.max, dtype=float))
        if self.min.shape != self.max.shape:
            raise ValueError("min/max shape mismatch")
        if np.any(self.min > self.max):
            raise ValueError("min must be <= max")

    @property
    def constant_dims(self) -> np.ndarray:
        return self.max == self.min


def fit_normalization(dataset: Dataset) -> NormalizationStats:
    """Exact per-dimension extrema across the entire dataset."""
    if len(dataset) == 0:
        raise ValueError("cannot fit normalization on an empty dataset")
    x = dataset.inputs()
    return NormalizationStats(min=x.min(axis=0), max=x.max(axis=0))


def normalize(x, stats: NormalizationStats) -> np.ndarray:
    """Affine map of each dimension onto [-1, 1]; constant dimensions map to 0."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != stats.min.shape[0]:
        raise ValueError(f"expected {stats.min.shape[0]} dims, got {x.shape[-1]}")
    span = stats.max - stats.min
    safe = np.where(span == 0, 1.0, span)
    out = 2.0 * (x - stats.min) / safe - 1.0
    return np.where(span == 0, 0.0, out)


def denormalize(z, stats: NormalizationStats) -> np.ndarray:
    """Inverse of normalize; constant dimensions recover their constant."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != stats.min.shape[0]:
        raise ValueError(f"expected {stats.min.shape[0]} dims, got {z.shape[-1]}")
    span = stats.max - stats.min
    return np.where(span == 0, stats.min, (z + 1.0) / 2.0 * span + stats.min)


def split(dataset: Dataset, ratio: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded stratified train/validation split.

    Stratification by point_id keeps every class represented in training for
    any reasonably repeated point. Train gets floor(ratio*k) samples exactly.
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError("ratio must be in (0, 1)")
    k = len(dataset)
    n_train = int(np.floor(ratio * k))
    if n_train < 1 or k - n_train < 1:
        raise ValueError(f"dataset of size {k} too small for a {ratio} split")

    groups: dict[int, list[int]] = {}
    for i, s in enumerate(dataset.samples):
        groups.setdefault(s.point_id, []).append(i)

    rng = np.random.default_rng(seed)
    quotas = {}
    fractions = []
    total_base = 0
    for pid in sorted(groups):
        exact = ratio * len(groups[pid])
        base = int(np.floor(exact))
        quotas[pid] = base
        total_base += base
        fractions.append((exact - base, pid))
    # Largest-remainder top-up so train size is exactly floor(ratio*k).
    fractions.sort(key=lambda t: (-t[0], t[1]))
    for _, pid in fractions[: n_train - total_base]:
        quotas[pid] += 1

    train_idx, val_idx = [], []
    for pid in sorted(groups):
        idx = np.array(groups[pid])
        rng.shuffle(idx)
        train_idx.extend(idx[: quotas[pid]].tolist())
        val_idx.extend(idx[quotas[pid] :].tolist())
    train_idx.sort()
    val_idx.sort()
    return dataset.subset(train_idx), dataset.subset(val_idx)


def encode_class(p, chain: KinematicChain, points, tol: float = DEFAULT_ENCODE_TOL) -> int:
    """Map a contact location to the nearest registered point's class index.

    Locations are compared against the points' static registered coordinates
    (home-posture positions, the same convention the dataset labels use). The
    origin maps to the no-contact class n; anything farther than tol from
    every point is an error.
    """
    points = list(points)
    if not points:
        raise ValueError("empty point registry")
    p = np.asarray(p, dtype=float)
    if np.all(p == 0.0):
        return len(points)
    coords = reference_points(chain, points)
    dists = np.linalg.norm(coords - p, axis=1)
    best = int(np.argmin(dists))
    if dists[best] > tol:
        raise ValueError(f"location {p.tolist()} is {dists[best]:.3f} m from the nearest point (tol {tol})")
    return points[best].point_id


def decode_class(label: int, chain: KinematicChain, points) -> np.ndarray:
    """Class index back to its registered coordinate, or (0,0,0) for class n."""
    points = list(points)
    n = len(points)
    if not (0 <= label <= n):
        raise ValueError(f"class {label} outside [0, {n}]")
    if label == n:
        return np.zeros(3)
    return reference_points(chain, [points[label]])[0]


def one_hot(label: int, n_points: int) -> np.ndarray:
    v = np.zeros(n_points + 1)
    v[label] = 1.0
    return v


# ---------------------------------------------------------------------------
# File format: one JSON header line, then one JSON record per sample.


def _format_record(obj) -> str:
    # repr-based float serialization round-trips exactly (>= 9 significant digits).
    return json.dumps(obj, separators=(",", ":"))


def save_dataset(dataset: Dataset, path) -> None:
    header = {
        "schema": SCHEMA,
        "robot": dataset.robot_id,
        "dof": dataset.dof,
        "n_points": dataset.n_points,
        "protocol": dataset.metadata,
        "points": [
            {
                "id": p.point_id,
                "link": p.link_id,
                "xyz": [float(v) for v in p.local_position],
                "normal": [float(v) for v in p.normal],
            }
            for p in dataset.points
        ],
    }
    with open(path, "w") as fh:
        fh.write(_format_record(header) + "\n")
        for s in dataset.samples:
            record = {
                "p": [float(v) for v in s.p],
                "q": [float(v) for v in s.q],
                "tau": [float(v) for v in s.tau],
                "point_id": int(s.point_id),
                "t": float(s.t),
            }
            fh.write(_format_record(record) + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError("line 1: empty file, expected header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise SchemaError(f"line 1: bad header ({e.msg})") from None
    if header.get("schema") != SCHEMA:
        raise SchemaError(f"line 1: unknown schema {header.get('schema')!r}")
    dof = int(header["dof"])
    n_points = int(header["n_points"])

    if "points" in header:
        points = [
            SurfacePoint(
                point_id=int(e["id"]),
                link_id=e["link"],
                local_position=np.asarray(e["xyz"], dtype=float),
                normal=np.asarray(e.get("normal", [1.0, 0.0, 0.0]), dtype=float),
            )
            for e in header["points"]
        ]
    else:
        points = preset_chain(header["robot"]).surface_points
    if len(points) != n_points:
        raise SchemaError(f"line 1: header declares {n_points} points, found {len(points)}")

    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            sample = ProprioSample(
                p=rec["p"], q=rec["q"], tau=rec["tau"], point_id=int(rec["point_id"]), t=float(rec.get("t", 0.0))
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"line {lineno}: {e}") from None
        if len(sample.q) != dof or len(sample.tau) != dof:
            raise SchemaError(
                f"line {lineno}: header dof={dof} but sample has {len(sample.q)} positions / {len(sample.tau)} torques"
            )
        samples.append(sample)
    return Dataset(samples, points, header.get("robot", ""), dof, header.get("protocol", {}))
