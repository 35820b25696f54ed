"""Sampled-signal primitives: the Waveform type, tone synthesis, mixing,
band-limited fractional delay, seeded noise injection and mono WAV I/O.

Noise generation
----------------
All randomness goes through NumPy's PCG64 bit generator.  A seed (an int or a
tuple of ints) is expanded with ``numpy.random.SeedSequence`` and Gaussian
samples are drawn with ``Generator.standard_normal`` (ziggurat method).  Per-call
streams are derived by passing a tuple, e.g. ``(seed, channel_index)``; see
:func:`make_rng`.  Outputs are bit-exact within one NumPy version.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.io import wavfile

DEFAULT_SAMPLE_RATE_HZ = 48000.0
DEFAULT_KERNEL_HALF_WIDTH = 32

SeedLike = Union[int, Sequence[int]]


class SampleRateMismatch(ValueError):
    pass


class AliasingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled real signal.

    ``samples`` is stored as a read-only float64 array so a Waveform can be
    shared freely between threads and processes.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        arr = np.array(self.samples, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("waveform samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def with_samples(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate_hz)

    def scaled(self, gain: float) -> "Waveform":
        return Waveform(self.samples * gain, self.sample_rate_hz)

    def padded(self, length: int, offset: int = 0) -> "Waveform":
        """Place the signal at ``offset`` inside a zero buffer of ``length``."""
        out = np.zeros(length)
        n = max(0, min(len(self), length - offset))
        out[offset:offset + n] = self.samples[:n]
        return Waveform(out, self.sample_rate_hz)

    def slice(self, start: int, stop: int) -> "Waveform":
        return Waveform(self.samples[start:stop], self.sample_rate_hz)


def silence(num_samples: int, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> Waveform:
    return Waveform(np.zeros(num_samples), sample_rate_hz)


def check_same_rate(waveforms: Sequence[Waveform]) -> float:
    rates = {w.sample_rate_hz for w in waveforms}
    if len(rates) > 1:
        raise SampleRateMismatch(f"sample rates differ: {sorted(rates)}")
    return rates.pop()


def tone(freq_hz: float, duration_s: float, amplitude: float = 1.0,
         phase_rad: float = 0.0,
         sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> Waveform:
    """amplitude * sin(2*pi*f*k/fs + phase) for round(duration*fs) samples."""
    if not 0 < freq_hz < sample_rate_hz / 2:
        raise AliasingError(
            f"{freq_hz} Hz is outside (0, Nyquist={sample_rate_hz / 2} Hz)")
    if not duration_s > 0:
        raise ValueError(f"duration must be positive, got {duration_s}")
    n = int(round(duration_s * sample_rate_hz))
    k = np.arange(n)
    return Waveform(amplitude * np.sin(2 * np.pi * freq_hz * k / sample_rate_hz + phase_rad),
                    sample_rate_hz)


def mix(inputs: Sequence[Tuple[Waveform, float]]) -> Waveform:
    """Weighted sum of waveforms; shorter inputs are zero-padded at the tail."""
    if not inputs:
        raise ValueError("mix needs at least one input")
    rate = check_same_rate([w for w, _ in inputs])
    length = max(len(w) for w, _ in inputs)
    out = np.zeros(length)
    for w, gain in inputs:
        out[:len(w)] += gain * w.samples
    return Waveform(out, rate)


def power(w: Waveform) -> float:
    if len(w) == 0:
        raise ValueError("power of an empty waveform is undefined")
    return float(np.mean(w.samples ** 2))


def sinc_kernel(frac: float, half_width: int = DEFAULT_KERNEL_HALF_WIDTH) -> np.ndarray:
    """Hann-windowed sinc taps for a delay of ``frac`` samples, 0 <= frac < 1.

    Tap ``p`` multiplies x[m - (p - half_width + 1)], i.e. lags
    -half_width+1 .. half_width.
    """
    lags = np.arange(-half_width + 1, half_width + 1)
    t = lags - frac
    window = 0.5 * (1.0 + np.cos(np.pi * t / half_width))
    return np.sinc(t) * window


def delay_samples(x: np.ndarray, delay: float,
                  half_width: int = DEFAULT_KERNEL_HALF_WIDTH) -> np.ndarray:
    """Delay a 1-D array by a (possibly fractional) number of samples.

    Samples shifted in from outside the record are zero; the first and last
    ``half_width`` output samples are unreliable for fractional delays.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    shift = math.floor(delay)
    frac = delay - shift
    if frac > 1 - 1e-12:
        shift, frac = shift + 1, 0.0
    out = np.zeros(n)
    if frac < 1e-12:
        if abs(shift) < n:
            if shift >= 0:
                out[shift:] = x[:n - shift]
            else:
                out[:n + shift] = x[-shift:]
        return out
    h = sinc_kernel(frac, half_width)
    full = np.convolve(x, h)
    # y[m] = full[m + half_width - 1 - shift]
    start = half_width - 1 - shift
    lo = max(0, -start)
    hi = min(n, full.shape[0] - start)
    if lo < hi:
        out[lo:hi] = full[lo + start:hi + start]
    return out


def fractional_delay(w: Waveform, delay_s: float,
                     half_width: int = DEFAULT_KERNEL_HALF_WIDTH) -> Waveform:
    """Band-limited delay by ``delay_s`` seconds (negative values advance).

    Output length equals input length.
    """
    d = delay_s * w.sample_rate_hz
    if abs(d) > len(w) + half_width:
        raise ValueError(f"delay of {d:.1f} samples exceeds the {len(w)}-sample record")
    return w.with_samples(delay_samples(w.samples, d, half_width))


def make_rng(seed: SeedLike) -> np.random.Generator:
    """PCG64 generator seeded through SeedSequence (ints or tuples of ints)."""
    entropy = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def noise_std(signal_power: float, snr_db: float) -> float:
    return math.sqrt(signal_power / 10 ** (snr_db / 10))


def add_awgn(w: Waveform, snr_db: float, seed: SeedLike) -> Waveform:
    """Add white Gaussian noise at ``snr_db`` relative to the signal's power.

    ``snr_db = math.inf`` (or None) is the noiseless mode and returns ``w``.
    """
    if snr_db is None or snr_db == math.inf:
        return w
    p = power(w)
    if p == 0:
        raise ValueError("cannot set an SNR on a zero-power signal")
    noise = noise_std(p, snr_db) * make_rng(seed).standard_normal(len(w))
    return w.with_samples(w.samples + noise)


def write_wav(path, w: Waveform) -> None:
    """Mono 32-bit IEEE float WAV."""
    wavfile.write(str(path), _wav_rate(w.sample_rate_hz), w.samples.astype("<f4"))


def read_wav(path) -> Waveform:
    rate, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono WAV, found {data.shape[1]} channels")
    return Waveform(_to_float(data), rate)


def _wav_rate(rate: float) -> int:
    if rate != int(rate):
        raise ValueError(f"WAV needs an integer sample rate, got {rate}")
    return int(rate)


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype.kind == "f":
        return data.astype(np.float64)
    info = np.iinfo(data.dtype)
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128) / 128
    return data.astype(np.float64) / -info.min
