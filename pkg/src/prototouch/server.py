"""Telemetry/command gateway for the interactive touch console.

Each connection owns one simulated robot: the session holds the current joint
configuration, synthesizes torques for the applied touch every tick, runs the
filtered localizer, maps predictions to regions, and pushes telemetry frames.
Commands and ticks are serialized through the session owner, so a malformed or
surprising message can answer with an error without corrupting state.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from prototouch.contact_sim import CollectionProtocol, ContactEvent, contact_torques, resolve_torque_sigma
from prototouch.dataset import normalize
from prototouch.kinematics import (
    KinematicChain,
    chain_to_dict,
    forward_kinematics,
    home_config,
    reference_points,
)
from prototouch.live import EmaFilter
from prototouch.model import CLASSIFICATION, NO_CONTACT_RADIUS, MlpModel, predict
from prototouch.phri import DwellTracker, RegionRule, locate_region, preset_rules, rules_to_list, validate_rules


@dataclass
class ServeConfig:
    tick_hz: float = 60.0
    realtime: bool = True  # False: ticks run back-to-back with simulated timestamps
    noise_sigma_torque: float | None = None  # None: dataset default for this chain
    noise_sigma_position: float = 0.002
    default_force: float = 28.0  # N, inward, used when touch_apply omits force
    force_min: float = 1.0
    force_max: float = 30.0
    dwell_s: float = 0.3
    gap_tolerance_s: float = 0.1
    seed: int = 0


class Session:
    """Single-connection simulator state; one owner, no sharing."""

    def __init__(self, chain: KinematicChain, model: MlpModel, rules, config: ServeConfig, sigma_tau: float):
        self.chain = chain
        self.model = model
        self.rules = list(rules)
        self.config = config
        self.sigma_tau = sigma_tau
        self.rng = np.random.default_rng(config.seed)
        self.q = home_config(chain)
        self.poses = forward_kinematics(chain, self.q)
        self.touch: ContactEvent | None = None
        self.ema = EmaFilter()
        self.tracker = DwellTracker(self.rules, config.dwell_s, config.gap_tolerance_s)
        self.points_ref = reference_points(chain)
        self.tick_index = 0
        self.quiet_frames = 0

    # -- commands ----------------------------------------------------------

    def handle(self, text: str) -> list[dict]:
        try:
            msg = json.loads(text)
        except json.JSONDecodeError as e:
            return [{"type": "error", "message": f"bad json: {e.msg}"}]
        if not isinstance(msg, dict):
            return [{"type": "error", "message": "message must be an object"}]
        kind = msg.get("type")
        try:
            if kind == "touch_apply":
                return self._touch_apply(msg)
            if kind == "touch_release":
                self.touch = None
                return []
            if kind == "set_config":
                return self._set_config(msg)
            if kind == "set_rules":
                return self._set_rules(msg)
        except (KeyError, TypeError, ValueError) as e:
            return [{"type": "error", "message": str(e)}]
        return [{"type": "error", "message": f"unknown message type {kind!r}"}]

    def _touch_apply(self, msg) -> list[dict]:
        point_id = msg.get("point_id")
        force = msg.get("force")
        if point_id is not None:
            point = self.chain.point(int(point_id))
            if force is None:
                normal_w = self.poses[point.link_id][:3, :3] @ point.normal
                force = (-self.config.default_force * normal_w).tolist()
            event = ContactEvent(force=force, point_id=int(point_id))
        else:
            link = msg.get("link")
            local = msg.get("local")
            if link is None or local is None or force is None:
                return [{"type": "error", "message": "free touch needs link, local, and force"}]
            if not self.chain.has_link(link):
                return [{"type": "error", "message": f"unknown link {link!r}"}]
            event = ContactEvent(force=force, link_id=link, local_position=np.asarray(local, dtype=float))
        magnitude = float(np.linalg.norm(event.force))
        if not (self.config.force_min <= magnitude <= self.config.force_max):
            return [
                {
                    "type": "error",
                    "message": f"force magnitude {magnitude:.2f} N outside "
                    f"[{self.config.force_min}, {self.config.force_max}]",
                }
            ]
        self.touch = event
        return []

    def _set_config(self, msg) -> list[dict]:
        q = np.asarray(msg["q"], dtype=float)
        self.chain.config(q)  # validates length and limits
        self.q = q
        self.poses = forward_kinematics(self.chain, self.q)
        return []

    def _set_rules(self, msg) -> list[dict]:
        rules = preset_rules(msg["preset"])
        validate_rules(rules, self.chain)
        self.rules = rules
        self.tracker = DwellTracker(self.rules, self.config.dwell_s, self.config.gap_tolerance_s)
        return []

    # -- simulation --------------------------------------------------------

    def tick(self) -> list[dict]:
        t = self.tick_index / self.config.tick_hz
        self.tick_index += 1
        dof = self.chain.dof

        if self.touch is not None:
            tau = contact_torques(self.chain, self.q, self.touch, poses=self.poses)
        else:
            tau = np.zeros(dof)
        tau = tau + self.rng.normal(0.0, self.sigma_tau, size=dof)
        q_rec = self.q + self.rng.normal(0.0, self.config.noise_sigma_position, size=dof)

        coords = self.points_ref if self.model.head == CLASSIFICATION else None
        pred = predict(self.model, q_rec, tau, points_world=coords)
        raw = pred.location if pred.location is not None else np.zeros(3)
        smoothed = self.ema.update(raw)
        contact = bool(np.linalg.norm(smoothed) >= NO_CONTACT_RADIUS)
        if contact:
            self.quiet_frames = 0
        else:
            self.quiet_frames += 1
            if self.quiet_frames >= self.ema.window:
                self.ema.reset()
                self.quiet_frames = 0

        region = locate_region(self.rules, self.chain, q_rec, smoothed, poses=self.poses) if contact else None
        events = self.tracker.update(t, region, smoothed)

        normalized = normalize(np.concatenate([q_rec, tau]), self.model.stats)
        out = [
            {
                "type": "telemetry",
                "t": t,
                "q": q_rec.tolist(),
                "tau": tau.tolist(),
                "tau_normalized": normalized[dof:].tolist(),
                "p_raw": raw.tolist(),
                "p_smoothed": smoothed.tolist(),
                "contact": contact,
                "region": region,
            }
        ]
        for event in events:
            out.append(
                {
                    "type": "action",
                    "label": event.action_label,
                    "region": event.region_id,
                    "t": event.t,
                    "location": event.location.tolist(),
                }
            )
        return out

    def hello(self) -> dict:
        return {
            "type": "hello",
            "robot": self.chain.name,
            "dof": self.chain.dof,
            "tick_hz": self.config.tick_hz,
            "q0": self.q.tolist(),
            "force_range": [self.config.force_min, self.config.force_max],
            "default_force": self.config.default_force,
            "chain": chain_to_dict(self.chain),
            "rules": rules_to_list(self.rules),
        }


def build_app(chain: KinematicChain, model: MlpModel, rules, config: ServeConfig | None = None, static_dir=None) -> FastAPI:
    if config is None:
        config = ServeConfig()
    validate_rules(rules, chain)
    if model.dof != chain.dof:
        raise ValueError(f"model dof {model.dof} does not match chain dof {chain.dof}")
    protocol = CollectionProtocol(
        noise_sigma_torque=config.noise_sigma_torque,
        noise_sigma_position=config.noise_sigma_position,
        seed=config.seed,
    )
    sigma_tau = resolve_torque_sigma(chain, protocol)

    app = FastAPI(title="prototouch gateway")

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        session = Session(chain, model, rules, config, sigma_tau)
        inbox: asyncio.Queue[str] = asyncio.Queue()

        async def reader():
            try:
                while True:
                    await inbox.put(await websocket.receive_text())
            except WebSocketDisconnect:
                pass

        reader_task = asyncio.create_task(reader())
        period = 1.0 / config.tick_hz
        loop = asyncio.get_running_loop()
        next_deadline = loop.time() + period
        try:
            await websocket.send_text(json.dumps(session.hello()))
            while True:
                while not inbox.empty():
                    for reply in session.handle(inbox.get_nowait()):
                        await websocket.send_text(json.dumps(reply))
                for message in session.tick():
                    await websocket.send_text(json.dumps(message))
                if config.realtime:
                    delay = next_deadline - loop.time()
                    if delay > 0:
                        await asyncio.sleep(delay)
                    next_deadline += period
                else:
                    await asyncio.sleep(0)
        except (WebSocketDisconnect, RuntimeError):
            pass  # client went away mid-send
        finally:
            reader_task.cancel()

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
