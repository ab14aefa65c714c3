"""Touch-region rules and dwell-based action dispatch.

Regions are spheres attached to links so they ride along with posture changes.
A region fires once per continuous dwell episode: the same region must be
observed for at least the dwell time, short observation gaps are tolerated,
and the region must be exited before it can fire again.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from prototouch.kinematics import KinematicChain, forward_kinematics, world_point

CATEGORIES = ("MOTION", "POSTURE", "EXPRESSION", "BUTTON")

SPOTLIKE_ACTIONS = frozenset(
    {
        "turn_on_forehand",
        "turn_on_haunches",
        "shift_forehand",
        "shift_haunches",
        "sidepass",
        "leg_lift",
        "lie_down",
        "sit",
        "wiggle",
        "play_bow",
    }
)
FRANKALIKE_ACTIONS = frozenset({"pick_green", "pick_red", "pick_yellow"})
KNOWN_ACTIONS = SPOTLIKE_ACTIONS | FRANKALIKE_ACTIONS

DEFAULT_DWELL_S = 0.3
DEFAULT_GAP_TOLERANCE_S = 0.1


@dataclass(frozen=True)
class RegionRule:
    region_id: int
    link_id: str
    center: np.ndarray  # meters, link frame
    radius: float
    action_label: str
    category: str

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise ValueError(f"region {self.region_id}: radius must be positive")
        if self.category not in CATEGORIES:
            raise ValueError(f"region {self.region_id}: unknown category {self.category!r}")


@dataclass(frozen=True)
class ActionEvent:
    action_label: str
    region_id: int
    t: float  # seconds
    location: np.ndarray  # contact estimate at trigger time


def validate_rules(rules, chain: KinematicChain) -> None:
    seen_labels = set()
    for rule in rules:
        if not chain.has_link(rule.link_id):
            raise ValueError(f"region {rule.region_id}: unknown link {rule.link_id!r}")
        if rule.action_label not in KNOWN_ACTIONS:
            raise ValueError(f"region {rule.region_id}: unknown action {rule.action_label!r}")
        if rule.action_label in seen_labels:
            raise ValueError(f"action {rule.action_label!r} appears in more than one rule")
        seen_labels.add(rule.action_label)


def locate_region(rules, chain: KinematicChain, q, p_hat, poses=None) -> int | None:
    """Region whose sphere contains p_hat; overlaps resolve to the closest
    center, then the lower region id. Boundary inclusive; None if outside all."""
    if poses is None:
        poses = forward_kinematics(chain, q)
    p_hat = np.asarray(p_hat, dtype=float)
    best = None
    for rule in rules:
        center_w = world_point(chain, q, (rule.link_id, rule.center), poses=poses)
        d = float(np.linalg.norm(p_hat - center_w))
        if d <= rule.radius:
            key = (d, rule.region_id)
            if best is None or key < best[0]:
                best = (key, rule.region_id)
    return None if best is None else best[1]


class DwellTracker:
    """Per-session dispatch state: one event per continuous dwell episode."""

    def __init__(self, rules, dwell_s: float = DEFAULT_DWELL_S, gap_tolerance_s: float = DEFAULT_GAP_TOLERANCE_S):
        if dwell_s < 0 or gap_tolerance_s < 0:
            raise ValueError("dwell and gap tolerance must be >= 0")
        self._by_id = {rule.region_id: rule for rule in rules}
        self.dwell_s = dwell_s
        self.gap_tolerance_s = gap_tolerance_s
        self._prev_t = None
        self._current = None
        self._entered_t = 0.0
        self._last_seen_t = 0.0
        self._fired = False

    def reset(self) -> None:
        self._prev_t = None
        self._current = None
        self._fired = False

    def update(self, t: float, region_id: int | None, location=None) -> list[ActionEvent]:
        """Feed one timestamped region observation; returns fired events."""
        if self._prev_t is not None and t <= self._prev_t:
            raise ValueError(f"non-monotone timestamp {t} after {self._prev_t}")
        self._prev_t = t

        if region_id is None:
            if self._current is not None and (t - self._last_seen_t) > self.gap_tolerance_s:
                self._current = None
                self._fired = False
            return []

        if region_id != self._current:
            self._current = region_id
            self._entered_t = t
            self._fired = False
        elif (t - self._last_seen_t) > self.gap_tolerance_s:
            # Too long unseen: same region counts as a fresh episode.
            self._entered_t = t
            self._fired = False
        self._last_seen_t = t

        if not self._fired and (t - self._entered_t) >= self.dwell_s:
            self._fired = True
            rule = self._by_id.get(region_id)
            if rule is None:
                raise KeyError(f"observation for unknown region {region_id}")
            loc = np.zeros(3) if location is None else np.asarray(location, dtype=float)
            return [ActionEvent(action_label=rule.action_label, region_id=region_id, t=t, location=loc)]
        return []


def dispatch(rules, observations, dwell_s: float = DEFAULT_DWELL_S, gap_tolerance_s: float = DEFAULT_GAP_TOLERANCE_S):
    """Run a scripted timeline of (t, region_id|None[, location]) observations."""
    tracker = DwellTracker(rules, dwell_s, gap_tolerance_s)
    events = []
    for obs in observations:
        t, region_id = obs[0], obs[1]
        location = obs[2] if len(obs) > 2 else None
        events.extend(tracker.update(t, region_id, location))
    return events


# ---------------------------------------------------------------------------
# Rule files


def rules_from_list(data) -> list[RegionRule]:
    return [
        RegionRule(
            region_id=int(e["region"]),
            link_id=e["link"],
            center=np.asarray(e["center"], dtype=float),
            radius=float(e["radius"]),
            action_label=e["action"],
            category=e["category"],
        )
        for e in data
    ]


def rules_to_list(rules) -> list[dict]:
    return [
        {
            "region": r.region_id,
            "link": r.link_id,
            "center": [float(v) for v in r.center],
            "radius": r.radius,
            "action": r.action_label,
            "category": r.category,
        }
        for r in rules
    ]


def load_rules(path) -> list[RegionRule]:
    with open(path) as fh:
        return rules_from_list(json.load(fh))


def preset_rules(robot: str) -> list[RegionRule]:
    """Shipped rule sets: 10 quadruped actions or 3 arm buttons."""
    if robot not in ("spotlike", "frankalike"):
        raise ValueError(f"unknown robot {robot!r}")
    ref = resources.files("prototouch.presets").joinpath(f"{robot}.rules.json")
    return rules_from_list(json.loads(ref.read_text()))
