"""Real-time inference: prediction smoothing, stream processing, throughput.

The smoother is a normalized exponentially-weighted average over a sliding
window of recent raw predictions (alpha 0.1, window 40). Renormalizing over
the filled part of the buffer makes a constant input an exact fixed point and
gives samples older than the window exactly zero influence.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from prototouch.kinematics import KinematicChain, reference_points
from prototouch.model import CLASSIFICATION, NO_CONTACT_RADIUS, MlpModel, predict

DEFAULT_ALPHA = 0.1
DEFAULT_WINDOW = 40


class EmaFilter:
    """Windowed exponential smoothing of 3-vector predictions.

    Weight on the i-th most recent sample is alpha*(1-alpha)^i, renormalized
    over the buffered samples; the first sample is returned unchanged. State
    is owned by one stream at a time.
    """

    def __init__(self, alpha: float = DEFAULT_ALPHA, window: int = DEFAULT_WINDOW, dim: int = 3):
        if not (0.0 < alpha <= 1.0):
            raise ValueError("alpha must be in (0, 1]")
        if window < 1:
            raise ValueError("window must be >= 1")
        self.alpha = alpha
        self.window = window
        self._buffer = np.zeros((window, dim))
        self._head = -1
        self._count = 0
        # Newest-first geometric weights, fixed for the life of the filter.
        self._weights = alpha * (1.0 - alpha) ** np.arange(window)
        self._weight_sums = np.cumsum(self._weights)
        self._gather = np.empty(window, dtype=int)
        self.value: np.ndarray | None = None

    def update(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self._head = (self._head + 1) % self.window
        self._buffer[self._head] = x
        self._count = min(self._count + 1, self.window)
        m = self._count
        idx = self._gather[:m]
        np.mod(self._head - np.arange(m), self.window, out=idx)
        # Averaging deviations from the newest sample keeps a constant input an
        # exact fixed point (zero deviations) instead of accumulating rounding.
        deviation = (self._weights[:m] @ (self._buffer[idx] - x)) / self._weight_sums[m - 1]
        smoothed = x + deviation
        self.value = smoothed
        return smoothed

    def reset(self) -> None:
        """Clear history; the next sample is treated as the first."""
        self._head = -1
        self._count = 0
        self.value = None


@dataclass(frozen=True)
class StreamFrame:
    t: float
    raw: np.ndarray
    smoothed: np.ndarray
    contact: bool


def stream_infer(
    model: MlpModel,
    stream,
    chain: KinematicChain | None = None,
    points=None,
    alpha: float = DEFAULT_ALPHA,
    window: int = DEFAULT_WINDOW,
    no_contact_radius: float = NO_CONTACT_RADIUS,
):
    """Per-sample predict + smooth over an iterable of (t, q, tau).

    Yields StreamFrame(t, raw, smoothed, contact). The contact flag comes from
    the smoothed vector; the filter resets after a full window of consecutive
    no-contact frames so smoothing never leaks across touch episodes.
    Timestamps must be strictly increasing.
    """
    ema = EmaFilter(alpha=alpha, window=window)
    coords = None
    if model.head == CLASSIFICATION:
        if chain is None or points is None:
            raise ValueError("classification streams need chain and points to decode")
        coords = reference_points(chain, points)
    prev_t = None
    quiet = 0
    for t, q, tau in stream:
        if prev_t is not None and t <= prev_t:
            raise ValueError(f"non-monotone timestamp {t} after {prev_t}")
        prev_t = t
        raw = predict(model, q, tau, points_world=coords).location
        smoothed = ema.update(raw)
        contact = bool(np.linalg.norm(smoothed) >= no_contact_radius)
        if contact:
            quiet = 0
        else:
            quiet += 1
            if quiet >= window:
                ema.reset()
                quiet = 0
        yield StreamFrame(t=t, raw=raw, smoothed=smoothed, contact=contact)


def bench_throughput(model: MlpModel, duration_s: float = 10.0, seed: int = 0) -> dict:
    """Sustained single-thread predict+filter rate on synthetic inputs.

    Returns rate and latency stats plus the unfiltered predict rate for
    comparison. Inputs are drawn once from the model's normalization range so
    the loop itself is steady-state.
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if model.stats is None:
        raise ValueError("model has no normalization stats")
    rng = np.random.default_rng(seed)
    dof = model.dof
    pool_q = rng.uniform(model.stats.min[:dof], model.stats.max[:dof], size=(256, dof))
    pool_tau = rng.uniform(model.stats.min[dof:], model.stats.max[dof:], size=(256, dof))

    ema = EmaFilter()
    capacity = min(int(duration_s * 200_000) + 1024, 5_000_000)
    latencies = np.empty(capacity)
    count = 0
    start = time.perf_counter()
    deadline = start + duration_s
    now = start
    while now < deadline:
        i = count & 255
        t0 = time.perf_counter_ns()
        pred = predict(model, pool_q[i], pool_tau[i])
        ema.update(pred.location if pred.location is not None else np.zeros(3))
        t1 = time.perf_counter_ns()
        if count < capacity:
            latencies[count] = (t1 - t0) / 1000.0  # us
        count += 1
        now = time.perf_counter()
    elapsed = now - start
    recorded = latencies[: min(count, capacity)]

    # Short unfiltered phase for the raw-vs-filtered comparison.
    raw_duration = max(min(duration_s * 0.1, 2.0), 0.05)
    raw_count = 0
    raw_start = time.perf_counter()
    raw_deadline = raw_start + raw_duration
    while time.perf_counter() < raw_deadline:
        i = raw_count & 255
        predict(model, pool_q[i], pool_tau[i])
        raw_count += 1
    raw_elapsed = time.perf_counter() - raw_start

    return {
        "rate_hz": count / elapsed,
        "raw_rate_hz": raw_count / raw_elapsed,
        "mean_latency_us": float(recorded.mean()),
        "p99_latency_us": float(np.percentile(recorded, 99)),
        "duration_s": elapsed,
    }
