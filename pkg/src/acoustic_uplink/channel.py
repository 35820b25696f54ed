"""Far-field plane-wave reception on a uniform linear microphone array.

Angles are in degrees from broadside; a positive angle tilts the source toward
increasing microphone index.  Microphone 0 is the phase reference, so the wave
reaches microphone n with delay n * spacing * sin(angle) / c relative to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.io import wavfile

from .signal import (DEFAULT_KERNEL_HALF_WIDTH, SampleRateMismatch, SeedLike,
                     Waveform, _to_float, _wav_rate, check_same_rate,
                     delay_samples, make_rng, noise_std)

SPEED_OF_SOUND_MPS = 343.0


@dataclass(frozen=True)
class ArrayGeometry:
    num_mics: int = 10
    spacing_m: float = 0.05
    speed_of_sound_mps: float = SPEED_OF_SOUND_MPS

    def __post_init__(self):
        if self.num_mics < 1:
            raise ValueError("need at least one microphone")
        if self.spacing_m <= 0 or self.speed_of_sound_mps <= 0:
            raise ValueError("spacing and speed of sound must be positive")

    @property
    def positions_m(self) -> np.ndarray:
        return np.arange(self.num_mics) * self.spacing_m


@dataclass(frozen=True)
class SourceSpec:
    angle_deg: float
    waveform: Waveform
    gain: float = 1.0
    role: str = "data"

    def __post_init__(self):
        check_angle(self.angle_deg)
        if self.role not in ("data", "interference"):
            raise ValueError(f"unknown source role {self.role!r}")


@dataclass(frozen=True, eq=False)
class MultichannelRecording:
    channels: np.ndarray  # (num_mics, num_samples)
    sample_rate_hz: float
    geometry: ArrayGeometry

    def __post_init__(self):
        arr = np.array(self.channels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("channels must be a 2-D (mics, samples) array")
        if arr.shape[0] != self.geometry.num_mics:
            raise ValueError(
                f"{arr.shape[0]} channels for a {self.geometry.num_mics}-mic array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("recording contains non-finite samples")
        arr.setflags(write=False)
        object.__setattr__(self, "channels", arr)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def num_samples(self) -> int:
        return self.channels.shape[1]

    def channel(self, n: int) -> Waveform:
        return Waveform(self.channels[n], self.sample_rate_hz)

    def waveforms(self) -> List[Waveform]:
        return [self.channel(n) for n in range(self.geometry.num_mics)]

    def with_channels(self, channels) -> "MultichannelRecording":
        return MultichannelRecording(channels, self.sample_rate_hz, self.geometry)

    def __add__(self, other: "MultichannelRecording") -> "MultichannelRecording":
        if other.sample_rate_hz != self.sample_rate_hz:
            raise SampleRateMismatch("cannot add recordings with different sample rates")
        return self.with_channels(self.channels + other.channels)

    def scaled(self, gain: float) -> "MultichannelRecording":
        return self.with_channels(self.channels * gain)


def check_angle(angle_deg: float) -> None:
    if not -90.0 <= angle_deg <= 90.0:
        raise ValueError(f"angle {angle_deg} deg outside [-90, 90]")


def steering_delays(g: ArrayGeometry, angle_deg: float) -> np.ndarray:
    """Plane-wave arrival delay at each microphone relative to mic 0 (s)."""
    check_angle(angle_deg)
    return g.positions_m * math.sin(math.radians(angle_deg)) / g.speed_of_sound_mps


def steering_vector(g: ArrayGeometry, angle_deg: float, freq_hz: float,
                    sample_rate_hz: Optional[float] = None) -> np.ndarray:
    """exp(-i 2 pi f tau_n) for every microphone."""
    if sample_rate_hz is not None and not freq_hz < sample_rate_hz / 2:
        raise ValueError(f"{freq_hz} Hz is not below Nyquist")
    return np.exp(-2j * np.pi * freq_hz * steering_delays(g, angle_deg))


def channel_seed(seed: int, channel_index: int) -> tuple:
    return (int(seed), int(channel_index))


@dataclass(frozen=True, eq=False)
class ReceptionComponents:
    """Clean per-source channel contributions plus the noise actually added."""

    sources: List[MultichannelRecording]
    noise: MultichannelRecording
    roles: List[str]

    def clean(self, role: Optional[str] = None) -> MultichannelRecording:
        picked = [r for r, rl in zip(self.sources, self.roles) if role is None or rl == role]
        out = np.zeros_like(self.noise.channels)
        for r in picked:
            out = out + r.channels
        return self.noise.with_channels(out)

    def total(self) -> MultichannelRecording:
        return self.clean() + self.noise

    def interference_plus_noise(self) -> MultichannelRecording:
        return self.clean("interference") + self.noise


def propagate(g: ArrayGeometry, source: SourceSpec,
              half_width: int = DEFAULT_KERNEL_HALF_WIDTH) -> MultichannelRecording:
    """Noiseless contribution of one source at every microphone."""
    w = source.waveform
    taus = steering_delays(g, source.angle_deg) * w.sample_rate_hz
    x = source.gain * w.samples
    channels = np.stack([delay_samples(x, t, half_width) for t in taus])
    return MultichannelRecording(channels, w.sample_rate_hz, g)


def simulate_components(g: ArrayGeometry, sources: Sequence[SourceSpec],
                        snr_db: Optional[float] = None, seed: int = 0,
                        half_width: int = DEFAULT_KERNEL_HALF_WIDTH) -> ReceptionComponents:
    """Like :func:`simulate_reception` but keeps every additive term separate.

    The noise level of each channel is set from that channel's summed clean
    power, so the decomposition is exact: ``total()`` equals the recording
    ``simulate_reception`` returns for the same arguments.
    """
    if not sources:
        raise ValueError("need at least one source")
    rate = check_same_rate([s.waveform for s in sources])
    length = max(len(s.waveform) for s in sources)
    parts = []
    for s in sources:
        src = SourceSpec(s.angle_deg, s.waveform.padded(length), s.gain, s.role)
        parts.append(propagate(g, src, half_width))
    clean = sum(p.channels for p in parts)
    noise = np.zeros_like(clean)
    if snr_db is not None and snr_db != math.inf:
        for n in range(g.num_mics):
            p = float(np.mean(clean[n] ** 2))
            if p == 0:
                raise ValueError(f"channel {n} is silent; cannot set an SNR")
            rng = make_rng(channel_seed(seed, n))
            noise[n] = noise_std(p, snr_db) * rng.standard_normal(length)
    return ReceptionComponents(parts, MultichannelRecording(noise, rate, g),
                               [s.role for s in sources])


def simulate_reception(g: ArrayGeometry, sources: Sequence[SourceSpec],
                       snr_db: Optional[float] = None, seed: int = 0,
                       half_width: int = DEFAULT_KERNEL_HALF_WIDTH) -> MultichannelRecording:
    """Delay every source onto every microphone, sum, and add per-channel noise.

    ``snr_db`` of None or ``math.inf`` is noiseless.  Channel n draws its noise
    from the stream seeded by ``(seed, n)``.
    """
    return simulate_components(g, sources, snr_db, seed, half_width).total()


def white_noise_recording(g: ArrayGeometry, num_samples: int, sample_rate_hz: float,
                          std: float, seed: SeedLike) -> MultichannelRecording:
    rng = make_rng(seed)
    return MultichannelRecording(std * rng.standard_normal((g.num_mics, num_samples)),
                                 sample_rate_hz, g)


def write_multichannel_wav(path, rec: MultichannelRecording) -> None:
    """N-channel float32 WAV, channels interleaved in microphone order."""
    wavfile.write(str(path), _wav_rate(rec.sample_rate_hz), rec.channels.T.astype("<f4"))


def read_multichannel_wav(path, geometry: Optional[ArrayGeometry] = None) -> MultichannelRecording:
    rate, data = wavfile.read(str(path))
    data = _to_float(data)
    if data.ndim == 1:
        data = data[:, None]
    if geometry is None:
        geometry = ArrayGeometry(num_mics=data.shape[1])
    return MultichannelRecording(data.T, rate, geometry)
