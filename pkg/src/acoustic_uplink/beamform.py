"""Receive beamforming: presteering, delay-and-sum and the Frost LCMV beamformer.

The Frost beamformer runs on presteered channels, so the look-direction signal
is identical on every sensor and the constraint needs no angle dependence.
Weights form an N x J tapped delay line stored flat with index ``n*J + j``
(sensor n, tap j).  Each sample is processed as::

    y  = W . X
    W <- P (W - mu * y * X) + F

with constraint matrix C (column j picks tap j of every sensor),
P = I - C (C'C)^-1 C' and F = C (C'C)^-1 f, which keeps C'W = f at every step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .channel import ArrayGeometry, MultichannelRecording, steering_delays
from .signal import DEFAULT_KERNEL_HALF_WIDTH, Waveform, delay_samples


class AdaptationDiverged(RuntimeError):
    pass


def presteer_delays(g: ArrayGeometry, steer_angle_deg: float,
                    sample_rate_hz: float) -> np.ndarray:
    """Per-channel delays (in samples) applied by :func:`presteer`.

    Channel n is delayed by -tau_n plus a common bulk delay, rounded up to a
    whole sample, which makes every applied delay nonnegative.
    """
    if not -90 < steer_angle_deg < 90:
        raise ValueError(f"steer angle {steer_angle_deg} must lie strictly inside (-90, 90)")
    taus = steering_delays(g, steer_angle_deg) * sample_rate_hz
    return bulk_delay(g, steer_angle_deg, sample_rate_hz) - taus


def bulk_delay(g: ArrayGeometry, steer_angle_deg: float, sample_rate_hz: float) -> int:
    taus = steering_delays(g, steer_angle_deg) * sample_rate_hz
    return int(math.ceil(taus.max() - 1e-9))


def presteer(rec: MultichannelRecording, steer_angle_deg: float,
             half_width: int = DEFAULT_KERNEL_HALF_WIDTH) -> MultichannelRecording:
    """Time-align the look direction across channels.

    A source at ``steer_angle_deg`` ends up identical on every channel, delayed
    by ``bulk_delay(...)`` samples relative to its arrival at microphone 0.
    """
    delays = presteer_delays(rec.geometry, steer_angle_deg, rec.sample_rate_hz)
    return rec.with_channels(np.stack(
        [delay_samples(x, d, half_width) for x, d in zip(rec.channels, delays)]))


def delay_and_sum(rec: MultichannelRecording, steer_angle_deg: float) -> Waveform:
    aligned = presteer(rec, steer_angle_deg)
    return Waveform(aligned.channels.mean(axis=0), rec.sample_rate_hz)


@dataclass(frozen=True)
class FrostConfig:
    """Frost beamformer settings.

    With ``step_size_mu`` unset the step is normalised to the data:
    mu = alpha / (N * J * mean presteered channel power).
    """

    num_taps_J: int = 16
    step_size_mu: Optional[float] = None
    alpha: float = 0.01
    desired_response_f: Optional[Sequence[float]] = None
    steer_angle_deg: float = 0.0
    divergence_bound: float = 1e6

    def __post_init__(self):
        if self.num_taps_J < 1:
            raise ValueError("need at least one tap")
        if self.step_size_mu is not None and self.step_size_mu < 0:
            raise ValueError("step size must be nonnegative")
        if self.step_size_mu is None and not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.desired_response_f is not None:
            f = tuple(float(v) for v in self.desired_response_f)
            if len(f) != self.num_taps_J:
                raise ValueError(f"desired response has {len(f)} taps, expected {self.num_taps_J}")
            object.__setattr__(self, "desired_response_f", f)

    @property
    def desired_response(self) -> np.ndarray:
        if self.desired_response_f is None:
            f = np.zeros(self.num_taps_J)
            f[0] = 1.0
            return f
        return np.array(self.desired_response_f)


@dataclass(frozen=True, eq=False)
class FrostState:
    weights_W: np.ndarray
    constraint_C: np.ndarray
    quiescent_F: np.ndarray
    projection_P: np.ndarray
    desired_f: np.ndarray
    num_mics: int
    num_taps: int
    divergence_bound: float = 1e6

    def weight_matrix(self) -> np.ndarray:
        """Weights reshaped to (num_mics, num_taps)."""
        return self.weights_W.reshape(self.num_mics, self.num_taps)

    def constraint_residual(self) -> float:
        return float(np.max(np.abs(self.constraint_C.T @ self.weights_W - self.desired_f)))


def constraint_matrix(num_mics: int, num_taps: int) -> np.ndarray:
    return np.tile(np.eye(num_taps), (num_mics, 1))


def frost_init(cfg: FrostConfig, num_mics: int) -> FrostState:
    J = cfg.num_taps_J
    C = constraint_matrix(num_mics, J)
    CtC = C.T @ C
    assert np.array_equal(CtC, num_mics * np.eye(J))
    f = cfg.desired_response
    CtC_inv = np.eye(J) / num_mics
    F = C @ (CtC_inv @ f)
    P = np.eye(num_mics * J) - C @ CtC_inv @ C.T
    return FrostState(F.copy(), C, F, P, f, num_mics, J, cfg.divergence_bound)


def frost_step(state: FrostState, snapshot_X: np.ndarray, mu: float):
    """One constrained-LMS update; returns (new_state, output sample).

    ``snapshot_X[n*J + j]`` is presteered channel n at time k - j.
    """
    X = np.asarray(snapshot_X, dtype=np.float64)
    W = state.weights_W
    y = float(W @ X)
    if mu == 0:
        return state, y
    W_new = state.projection_P @ (W - mu * y * X) + state.quiescent_F
    if not np.linalg.norm(W_new) <= state.divergence_bound:
        raise AdaptationDiverged(
            f"adaptation diverged (|W| > {state.divergence_bound:g}); reduce mu")
    return replace(state, weights_W=W_new), y


def snapshots(x: np.ndarray, num_taps: int) -> np.ndarray:
    """Read-only (N, T, J) view with [n, k, j] = x[n, k - j], zero before k=0."""
    N, T = x.shape
    padded = np.zeros((N, T + num_taps - 1))
    padded[:, num_taps - 1:] = x
    return sliding_window_view(padded, num_taps, axis=1)[:, :, ::-1]


def snapshot(x: np.ndarray, k: int, num_taps: int) -> np.ndarray:
    """Flat length N*J snapshot for time k, as consumed by :func:`frost_step`."""
    N = x.shape[0]
    X = np.zeros((N, num_taps))
    for j in range(num_taps):
        if k - j >= 0:
            X[:, j] = x[:, k - j]
    return X.reshape(-1)


def normalized_step_size(x: np.ndarray, cfg: FrostConfig) -> float:
    if cfg.step_size_mu is not None:
        return float(cfg.step_size_mu)
    total = x.shape[0] * cfg.num_taps_J * float(np.mean(x ** 2))
    return cfg.alpha / total if total > 0 else 0.0


@dataclass(eq=False)
class FrostResult:
    output: Waveform
    state: FrostState
    mu: float
    bulk_delay_samples: int
    max_constraint_residual: float = 0.0
    weight_history: list = field(default_factory=list)
    mean_weights: Optional[np.ndarray] = None

    @property
    def weights(self) -> np.ndarray:
        return self.state.weight_matrix()


def adapt(x: np.ndarray, state: FrostState, mu: float, track_constraint: bool = False,
          history_every: int = 0, average_from: Optional[int] = None):
    """Run constrained LMS over presteered channels ``x`` of shape (N, T).

    Equivalent to calling :func:`frost_step` on every snapshot, but applies
    the projection through its block structure (subtract the across-sensor
    mean of every tap) instead of an (NJ x NJ) product.  Returns
    (outputs, final_state, max_constraint_residual, weight_history,
    mean_weights) where ``mean_weights`` averages W over samples
    ``average_from`` .. T-1 (None if not requested).
    """
    N, J = state.num_mics, state.num_taps
    view = snapshots(x, J)
    T = x.shape[1]
    W = state.weight_matrix().copy()
    f = state.desired_f
    quiescent = state.quiescent_F.reshape(N, J)
    bound = state.divergence_bound
    out = np.empty(T)
    worst = 0.0
    history = []
    acc = np.zeros_like(W) if average_from is not None else None
    for k in range(T):
        X = view[:, k, :]
        y = float(np.einsum("nj,nj->", W, X))
        out[k] = y
        if mu:
            V = W - (mu * y) * X
            W = V - V.mean(axis=0) + quiescent
            if track_constraint:
                worst = max(worst, float(np.max(np.abs(W.sum(axis=0) - f))))
            if (k & 255) == 0 and not np.linalg.norm(W) <= bound:
                raise AdaptationDiverged(
                    f"adaptation diverged at sample {k} (|W| > {bound:g}); reduce mu")
        if acc is not None and k >= average_from:
            acc += W
        if history_every and k % history_every == 0:
            history.append(W.copy())
    if not np.linalg.norm(W) <= bound:
        raise AdaptationDiverged(f"adaptation diverged (|W| > {bound:g}); reduce mu")
    mean_w = None
    if acc is not None:
        mean_w = acc / max(1, T - average_from)
    return out, replace(state, weights_W=W.reshape(-1).copy()), worst, history, mean_w


def filter_frozen(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Tapped-delay-line output with fixed (N, J) weights over channels x."""
    T = x.shape[1]
    y = np.zeros(T)
    for xn, wn in zip(x, weights):
        y += np.convolve(xn, wn)[:T]
    return y


def steady_state_start(num_samples: int, num_taps: int) -> int:
    """First sample of the steady-state window: the final half of the record,
    pushed later if needed so it never overlaps the warmup (the larger of the
    first 20% or 10 * J samples)."""
    warmup = max(num_samples // 5, 10 * num_taps)
    return min(max(num_samples // 2, warmup), max(num_samples - 1, 0))


def frost_run(rec: MultichannelRecording, cfg: FrostConfig, track_constraint: bool = False,
              history_every: int = 0) -> FrostResult:
    """Presteer toward ``cfg.steer_angle_deg`` and adapt over the whole record."""
    aligned = presteer(rec, cfg.steer_angle_deg)
    x = aligned.channels
    state = frost_init(cfg, rec.geometry.num_mics)
    mu = normalized_step_size(x, cfg)
    start = steady_state_start(x.shape[1], cfg.num_taps_J)
    out, state, worst, history, mean_w = adapt(x, state, mu, track_constraint,
                                               history_every, average_from=start)
    return FrostResult(Waveform(out, rec.sample_rate_hz), state, mu,
                       bulk_delay(rec.geometry, cfg.steer_angle_deg, rec.sample_rate_hz),
                       worst, history, mean_w)


def frost_process(rec: MultichannelRecording, cfg: FrostConfig) -> Waveform:
    return frost_run(rec, cfg).output


def apply_weights(rec: MultichannelRecording, weights: np.ndarray,
                  steer_angle_deg: float) -> Waveform:
    """Presteer then filter with frozen (N, J) weights (no adaptation)."""
    aligned = presteer(rec, steer_angle_deg)
    return Waveform(filter_frozen(aligned.channels, np.asarray(weights)), rec.sample_rate_hz)


def delay_and_sum_weights(num_mics: int) -> np.ndarray:
    return np.full((num_mics, 1), 1.0 / num_mics)


def response(g: ArrayGeometry, weights: np.ndarray, steer_angle_deg: float,
             freq_hz: float, angles_deg, sample_rate_hz: float) -> np.ndarray:
    """Complex array response of presteered tapped-delay weights (N, J)."""
    W = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    N, J = W.shape
    if N != g.num_mics:
        raise ValueError(f"weights for {N} mics, geometry has {g.num_mics}")
    angles = np.atleast_1d(np.asarray(angles_deg, dtype=np.float64))
    steer = steering_delays(g, steer_angle_deg)
    taus = np.stack([steering_delays(g, a) for a in angles]) - steer  # (A, N)
    tap_delay = np.arange(J) / sample_rate_hz
    phase = -2j * np.pi * freq_hz * (taus[:, :, None] + tap_delay[None, None, :])
    return np.einsum("anj,nj->a", np.exp(phase), W)


def beampattern(g: ArrayGeometry, freq_hz: float, angles_deg,
                weights: Optional[np.ndarray] = None, steer_angle_deg: float = 0.0,
                sample_rate_hz: float = 48000.0):
    """List of (angle_deg, gain_db).  Without weights, delay-and-sum is used."""
    if not freq_hz < sample_rate_hz / 2:
        raise ValueError(f"{freq_hz} Hz is not below Nyquist")
    if weights is None:
        weights = delay_and_sum_weights(g.num_mics)
    r = np.abs(response(g, weights, steer_angle_deg, freq_hz, angles_deg, sample_rate_hz))
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(r)
    return list(zip(np.atleast_1d(np.asarray(angles_deg, dtype=float)).tolist(), db.tolist()))


def write_beampattern_csv(path, pattern) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["angle_deg", "gain_db"])
        for angle, gain in pattern:
            w.writerow([f"{angle:.6g}", f"{gain:.6f}"])


def write_weights_csv(path, weights: np.ndarray) -> None:
    """One row per weight in flat order W[n*J + j]: columns mic, tap, weight."""
    W = np.atleast_2d(weights)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mic", "tap", "weight"])
        for n in range(W.shape[0]):
            for j in range(W.shape[1]):
                w.writerow([n, j, repr(float(W[n, j]))])
