#!/usr/bin/env python3
"""Regenerate the shipped chain and region presets.

Run from the repo root after editing geometry below:

    python3 scripts/generate_presets.py
"""

import json
import sys
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "prototouch" / "presets"

# Torso box half-extents (meters): length 1.1, width 0.5, height 0.2.
TORSO_HX, TORSO_HY, TORSO_HZ = 0.55, 0.25, 0.10


def spotlike_chain() -> dict:
    links = [{"id": "torso", "name": "torso"}]
    joints = []
    stance_points = []

    # Four legs: hip roll (x), hip pitch (y), knee (y). Knee limits keep the
    # stance bent so vertical foot loads always produce joint torque.
    for prefix, sx, sy in (("fl", 1, 1), ("fr", 1, -1), ("hl", -1, 1), ("hr", -1, -1)):
        hip, upper, lower = f"{prefix}_hip", f"{prefix}_upper", f"{prefix}_lower"
        links += [{"id": hip, "name": hip}, {"id": upper, "name": upper}, {"id": lower, "name": lower}]
        joints += [
            {
                "id": f"{prefix}_hip_x",
                "parent": "torso",
                "child": hip,
                "origin": {"xyz": [sx * 0.35, sy * 0.17, -0.08], "rpy": [0, 0, 0]},
                "axis": [1, 0, 0],
                "limits": [-0.35, 0.35],
            },
            {
                "id": f"{prefix}_hip_y",
                "parent": hip,
                "child": upper,
                "origin": {"xyz": [0, sy * 0.05, 0], "rpy": [0, 0, 0]},
                "axis": [0, 1, 0],
                "limits": [-0.55, 0.05],
            },
            {
                "id": f"{prefix}_knee",
                "parent": upper,
                "child": lower,
                "origin": {"xyz": [0, 0, -0.34], "rpy": [0, 0, 0]},
                "axis": [0, 1, 0],
                "limits": [0.6, 1.4],
            },
        ]
        stance_points.append({"link": lower, "xyz": [0, 0, -0.33]})

    # Six-joint arm plus gripper jaw, mounted top-front of the torso.
    arm_links = ["arm_shoulder", "arm_upper", "arm_elbow", "arm_forearm", "arm_wrist", "arm_hand", "arm_finger"]
    links += [{"id": lid, "name": lid} for lid in arm_links]
    joints += [
        {
            "id": "arm_sh0",
            "parent": "torso",
            "child": "arm_shoulder",
            "origin": {"xyz": [0.42, 0, 0.10], "rpy": [0, 0, 0]},
            "axis": [0, 0, 1],
            "limits": [-2.6, 2.6],
        },
        {
            "id": "arm_sh1",
            "parent": "arm_shoulder",
            "child": "arm_upper",
            "origin": {"xyz": [0, 0, 0.05], "rpy": [0, 0, 0]},
            "axis": [0, 1, 0],
            "limits": [-2.0, 0.5],
        },
        {
            "id": "arm_el0",
            "parent": "arm_upper",
            "child": "arm_elbow",
            "origin": {"xyz": [0.35, 0, 0], "rpy": [0, 0, 0]},
            "axis": [0, 1, 0],
            "limits": [0.0, 2.8],
        },
        {
            "id": "arm_el1",
            "parent": "arm_elbow",
            "child": "arm_forearm",
            "origin": {"xyz": [0.10, 0, 0.02], "rpy": [0, 0, 0]},
            "axis": [1, 0, 0],
            "limits": [-2.6, 2.6],
        },
        {
            "id": "arm_wr0",
            "parent": "arm_forearm",
            "child": "arm_wrist",
            "origin": {"xyz": [0.23, 0, 0], "rpy": [0, 0, 0]},
            "axis": [0, 1, 0],
            "limits": [-1.8, 1.8],
        },
        {
            "id": "arm_wr1",
            "parent": "arm_wrist",
            "child": "arm_hand",
            "origin": {"xyz": [0.08, 0, 0], "rpy": [0, 0, 0]},
            "axis": [1, 0, 0],
            "limits": [-2.9, 2.9],
        },
        {
            "id": "arm_gripper",
            "parent": "arm_hand",
            "child": "arm_finger",
            "origin": {"xyz": [0.06, 0, 0], "rpy": [0, 0, 0]},
            "axis": [0, 1, 0],
            "limits": [-1.5, 0.0],
        },
    ]

    # 104 sampled surface points: 26 each on left/right/top, 12 back, 10 front,
    # 4 on the arm. Grids sit on the torso box faces; normals point outward.
    points = []

    def add(link, xyz, normal):
        points.append(
            {
                "id": len(points),
                "link": link,
                "xyz": [round(float(v), 6) for v in xyz],
                "normal": [float(v) for v in normal],
            }
        )

    xs13 = np.linspace(-0.50, 0.50, 13)
    for z in (-0.05, 0.05):  # left face, y = +hy
        for x in xs13:
            add("torso", (x, TORSO_HY, z), (0, 1, 0))
    for z in (-0.05, 0.05):  # right face, y = -hy
        for x in xs13:
            add("torso", (x, -TORSO_HY, z), (0, -1, 0))
    # Top face covers the rear half only; the stowed arm blocks the front half.
    for y in (-0.15, 0.15):
        for x in np.linspace(-0.50, -0.02, 13):
            add("torso", (x, y, TORSO_HZ), (0, 0, 1))
    for z in (-0.06, 0.0, 0.06):  # back face, x = -hx (12 points)
        for y in (-0.18, -0.06, 0.06, 0.18):
            add("torso", (-TORSO_HX, y, z), (-1, 0, 0))
    for z in (-0.05, 0.05):  # front face, x = +hx (10 points)
        for y in (-0.16, -0.08, 0.0, 0.08, 0.16):
            add("torso", (TORSO_HX, y, z), (1, 0, 0))
    add("arm_upper", (0.18, 0, 0.04), (0, 0, 1))
    add("arm_forearm", (0.12, 0, 0.04), (0, 0, 1))
    add("arm_wrist", (0.04, 0, 0.04), (0, 0, 1))
    add("arm_finger", (0.04, 0, 0.02), (0, 0, 1))
    assert len(points) == 104, len(points)

    return {
        "robot": "spotlike",
        "links": links,
        "joints": joints,
        "surface_points": points,
        "stance_points": stance_points,
    }


def frankalike_chain() -> dict:
    links = [{"id": "base", "name": "base"}] + [{"id": f"link{i}", "name": f"link{i}"} for i in range(1, 8)]
    axes = {"z": [0, 0, 1], "y": [0, 1, 0]}
    spec = [
        ("j1", "base", "link1", [0, 0, 0.333], "z", [-2.7, 2.7]),
        ("j2", "link1", "link2", [0, 0, 0], "y", [-1.6, 1.6]),
        ("j3", "link2", "link3", [0, 0, 0.316], "z", [-2.7, 2.7]),
        ("j4", "link3", "link4", [0.0825, 0, 0], "y", [-2.8, -0.2]),
        ("j5", "link4", "link5", [-0.0825, 0, 0.384], "z", [-2.7, 2.7]),
        ("j6", "link5", "link6", [0, 0, 0], "y", [0.1, 3.0]),
        ("j7", "link6", "link7", [0.088, 0, 0.105], "z", [-2.9, 2.9]),
    ]
    joints = [
        {
            "id": jid,
            "parent": parent,
            "child": child,
            "origin": {"xyz": xyz, "rpy": [0, 0, 0]},
            "axis": axes[axis],
            "limits": limits,
        }
        for jid, parent, child, xyz, axis, limits in spec
    ]
    # 10 touch points spread over the seven links (one-plus per link).
    raw_points = [
        ("link1", [0.06, 0, 0.15], [1, 0, 0]),
        ("link2", [0, -0.07, 0.05], [0, -1, 0]),
        ("link2", [0.06, 0, 0.20], [1, 0, 0]),
        ("link3", [0.07, 0, 0.18], [1, 0, 0]),
        ("link4", [-0.06, 0, 0.10], [-1, 0, 0]),
        ("link4", [0, 0.06, 0.25], [0, 1, 0]),
        ("link5", [0, -0.07, 0.03], [0, -1, 0]),
        ("link6", [0.06, 0, 0.05], [1, 0, 0]),
        ("link7", [0.05, 0, 0.06], [1, 0, 0]),
        ("link7", [0, 0.05, 0.09], [0, 1, 0]),
    ]
    points = [
        {"id": i, "link": link, "xyz": xyz, "normal": normal}
        for i, (link, xyz, normal) in enumerate(raw_points)
    ]
    return {"robot": "frankalike", "links": links, "joints": joints, "surface_points": points}


def spotlike_rules() -> list[dict]:
    # Region spheres ride on links; motion regions straddle both side faces.
    return [
        {"region": 0, "link": "torso", "center": [0.33, 0, 0.06], "radius": 0.28, "action": "turn_on_forehand", "category": "MOTION"},
        {"region": 1, "link": "torso", "center": [-0.33, 0, 0.02], "radius": 0.26, "action": "turn_on_haunches", "category": "MOTION"},
        {"region": 2, "link": "torso", "center": [0.33, 0, -0.07], "radius": 0.28, "action": "shift_forehand", "category": "MOTION"},
        {"region": 3, "link": "torso", "center": [-0.33, 0, -0.07], "radius": 0.28, "action": "shift_haunches", "category": "MOTION"},
        {"region": 4, "link": "torso", "center": [0.0, 0, -0.02], "radius": 0.28, "action": "sidepass", "category": "MOTION"},
        {"region": 5, "link": "torso", "center": [0.56, 0, -0.02], "radius": 0.20, "action": "leg_lift", "category": "MOTION"},
        {"region": 6, "link": "torso", "center": [-0.05, 0, 0.13], "radius": 0.22, "action": "lie_down", "category": "POSTURE"},
        {"region": 7, "link": "torso", "center": [-0.42, 0, 0.12], "radius": 0.24, "action": "sit", "category": "POSTURE"},
        {"region": 8, "link": "arm_upper", "center": [0.17, 0, 0.05], "radius": 0.22, "action": "wiggle", "category": "EXPRESSION"},
        {"region": 9, "link": "arm_hand", "center": [0.05, 0, 0.02], "radius": 0.15, "action": "play_bow", "category": "EXPRESSION"},
    ]


def frankalike_rules() -> list[dict]:
    return [
        {"region": 0, "link": "link1", "center": [0.0, 0, 0.15], "radius": 0.12, "action": "pick_green", "category": "BUTTON"},
        {"region": 1, "link": "link4", "center": [0.0, 0, 0.15], "radius": 0.12, "action": "pick_red", "category": "BUTTON"},
        {"region": 2, "link": "link7", "center": [0.0, 0, 0.07], "radius": 0.12, "action": "pick_yellow", "category": "BUTTON"},
    ]


def main() -> int:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, data in (("spotlike", spotlike_chain()), ("frankalike", frankalike_chain())):
        path = OUT / f"{name}.chain.json"
        path.write_text(json.dumps(data, indent=1) + "\n")
        print(f"wrote {path}")
    for name, rules in (("spotlike", spotlike_rules()), ("frankalike", frankalike_rules())):
        path = OUT / f"{name}.rules.json"
        path.write_text(json.dumps(rules, indent=1) + "\n")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
