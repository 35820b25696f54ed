"""M-ary FSK modem with Goertzel detection and a CRC-protected frame format.

Frame layout, most significant bit first::

    preamble (13 symbols) | length (16 bits) | payload | CRC-16 | zero pad

The preamble is the Barker-13 sequence with +1 sent on the highest carrier and
-1 on the lowest.  The CRC is CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF)
over the length field and payload bits.  Pad bits fill out the final symbol;
the length field tells the receiver where the payload ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.signal import correlate, lfilter

from .signal import DEFAULT_SAMPLE_RATE_HZ, AliasingError, Waveform

BARKER_13 = (1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1)
LENGTH_FIELD_BITS = 16
CRC_BITS = 16
MAX_PAYLOAD_BITS = 4096
SYNC_THRESHOLD = 0.5

AUDIBLE_CARRIERS_HZ = (500.0, 1500.0, 2500.0, 3500.0)
ULTRASONIC_CARRIERS_HZ = (15500.0, 17000.0, 18500.0, 20000.0)


class FrameNotFound(ValueError):
    pass


class CorruptFrame(ValueError):
    """CRC or length check failed; ``bits`` holds the raw decoded frame bits."""

    def __init__(self, message, bits):
        super().__init__(message)
        self.bits = bits


@dataclass(frozen=True)
class FskConfig:
    carriers_hz: Tuple[float, ...] = AUDIBLE_CARRIERS_HZ
    symbol_duration_s: float = 0.01
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    amplitude: float = 1.0
    max_payload_bits: int = MAX_PAYLOAD_BITS

    def __post_init__(self):
        carriers = tuple(float(f) for f in self.carriers_hz)
        object.__setattr__(self, "carriers_hz", carriers)
        m = len(carriers)
        if m < 2 or m & (m - 1):
            raise ValueError(f"number of carriers must be a power of two >= 2, got {m}")
        if self.symbol_duration_s <= 0 or self.sample_rate_hz <= 0 or self.amplitude <= 0:
            raise ValueError("symbol duration, sample rate and amplitude must be positive")
        if carriers[0] <= 0:
            raise ValueError("carriers must be positive")
        if carriers[-1] >= self.sample_rate_hz / 2:
            raise AliasingError(
                f"carrier {carriers[-1]} Hz at or above Nyquist ({self.sample_rate_hz / 2} Hz)")
        spacing = np.diff(carriers)
        if np.any(spacing <= 0):
            raise ValueError("carriers must be strictly increasing")
        # small slack so 1 kHz spacing with 1 ms symbols is accepted
        if np.min(spacing) < (1 - 1e-9) / self.symbol_duration_s:
            raise ValueError(
                f"carrier spacing {np.min(spacing)} Hz is below the orthogonality "
                f"minimum 1/Ts = {1 / self.symbol_duration_s} Hz")

    @classmethod
    def ultrasonic(cls, **kw) -> "FskConfig":
        return cls(carriers_hz=ULTRASONIC_CARRIERS_HZ, **kw)

    @property
    def num_tones(self) -> int:
        return len(self.carriers_hz)

    @property
    def bits_per_symbol(self) -> int:
        return self.num_tones.bit_length() - 1

    @property
    def samples_per_symbol(self) -> int:
        return int(round(self.symbol_duration_s * self.sample_rate_hz))

    @property
    def preamble_symbols(self) -> np.ndarray:
        return np.array([self.num_tones - 1 if b > 0 else 0 for b in BARKER_13])


@dataclass
class Frame:
    preamble_symbols: np.ndarray
    payload_bits: np.ndarray

    @property
    def payload_len(self) -> int:
        return len(self.payload_bits)

    @classmethod
    def for_payload(cls, payload, cfg: FskConfig) -> "Frame":
        return cls(cfg.preamble_symbols, as_bits(payload))


def as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.int64).reshape(-1)
    if np.any((arr != 0) & (arr != 1)):
        raise ValueError("bits must be 0 or 1")
    return arr.astype(np.uint8)


def bits_to_symbols(bits, bits_per_symbol: int) -> np.ndarray:
    """Big-endian grouping; the bit count must be a multiple of bits_per_symbol."""
    bits = as_bits(bits)
    if len(bits) % bits_per_symbol:
        raise ValueError(f"{len(bits)} bits do not fill whole {bits_per_symbol}-bit symbols")
    groups = bits.reshape(-1, bits_per_symbol).astype(np.int64)
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1)
    return groups @ weights


def symbols_to_bits(symbols, bits_per_symbol: int) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=np.int64).reshape(-1, 1)
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    return ((symbols >> shifts) & 1).astype(np.uint8).reshape(-1)


def modulate_symbols(symbols, cfg: FskConfig, phases_rad=None) -> Waveform:
    """One burst per symbol.  ``phases_rad`` gives each burst a starting phase
    (default 0); random phases model an unsynchronized foreign transmitter.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.size == 0:
        raise ValueError("nothing to modulate")
    if symbols.min() < 0 or symbols.max() >= cfg.num_tones:
        raise ValueError(f"symbols must lie in 0..{cfg.num_tones - 1}")
    L = cfg.samples_per_symbol
    k = np.arange(L) / cfg.sample_rate_hz
    carriers = np.asarray(cfg.carriers_hz)
    if phases_rad is None:
        bursts = np.sin(2 * np.pi * np.outer(carriers, k))[symbols]
    else:
        phases = np.asarray(phases_rad, dtype=np.float64).reshape(-1, 1)
        bursts = np.sin(2 * np.pi * np.outer(carriers[symbols], k) + phases)
    return Waveform(cfg.amplitude * bursts.reshape(-1), cfg.sample_rate_hz)


def modulate(bits, cfg: FskConfig) -> Waveform:
    """Tone-burst FSK: each group of log2(M) bits selects one carrier burst.

    Every burst starts at phase zero.  The bit count must fill whole symbols;
    framing (:func:`encode_frame`) pads for you.
    """
    bits = as_bits(bits)
    if len(bits) == 0:
        raise ValueError("empty bit sequence")
    return modulate_symbols(bits_to_symbols(bits, cfg.bits_per_symbol), cfg)


def goertzel_energy(segment: Waveform, freq_hz: float) -> float:
    """|X(f)|^2 / N^2 of a segment via the Goertzel recurrence."""
    x = segment.samples
    if x.size == 0:
        raise ValueError("empty segment")
    if not 0 <= freq_hz < segment.sample_rate_hz / 2:
        raise AliasingError(f"{freq_hz} Hz is not below Nyquist")
    return float(goertzel_block(x[None, :], np.array([freq_hz]), segment.sample_rate_hz)[0, 0])


def goertzel_block(segments: np.ndarray, freqs_hz, sample_rate_hz: float) -> np.ndarray:
    """Goertzel energies for a (num_segments, N) block at several frequencies.

    Returns an array of shape (num_segments, len(freqs_hz)).
    """
    segments = np.atleast_2d(np.asarray(segments, dtype=np.float64))
    n = segments.shape[1]
    out = np.empty((segments.shape[0], len(freqs_hz)))
    for i, f in enumerate(freqs_hz):
        w = 2 * np.pi * f / sample_rate_hz
        coeff = 2 * math.cos(w)
        # s[n] = x[n] + coeff*s[n-1] - s[n-2]
        s = lfilter([1.0], [1.0, -coeff, 1.0], segments, axis=1)
        s1 = s[:, -1]
        s2 = s[:, -2] if n > 1 else np.zeros_like(s1)
        out[:, i] = s1 * s1 + s2 * s2 - coeff * s1 * s2
    return out / n ** 2


def symbol_energies(w: Waveform, cfg: FskConfig, start_sample: int,
                    num_symbols: int) -> np.ndarray:
    L = cfg.samples_per_symbol
    end = start_sample + num_symbols * L
    if start_sample < 0 or end > len(w):
        raise ValueError(
            f"{num_symbols} symbols from sample {start_sample} overrun the "
            f"{len(w)}-sample waveform")
    block = w.samples[start_sample:end].reshape(num_symbols, L)
    return goertzel_block(block, cfg.carriers_hz, cfg.sample_rate_hz)


def demodulate_symbols(w: Waveform, cfg: FskConfig, start_sample: int,
                       num_symbols: int) -> np.ndarray:
    # argmax picks the lowest index on ties
    return np.argmax(symbol_energies(w, cfg, start_sample, num_symbols), axis=1)


def demodulate(w: Waveform, cfg: FskConfig, start_sample: int, num_symbols: int) -> np.ndarray:
    """Noncoherent energy detection of ``num_symbols`` bursts from ``start_sample``."""
    symbols = demodulate_symbols(w, cfg, start_sample, num_symbols)
    return symbols_to_bits(symbols, cfg.bits_per_symbol)


def preamble_waveform(cfg: FskConfig) -> Waveform:
    return modulate_symbols(cfg.preamble_symbols, cfg)


def normalized_xcorr(x: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Normalized cross-correlation for every full overlap offset."""
    L = len(template)
    if len(x) < L:
        return np.zeros(0)
    num = correlate(x, template, mode="valid", method="fft")
    csum = np.concatenate(([0.0], np.cumsum(x * x)))
    local = np.sqrt(np.maximum(csum[L:] - csum[:-L], 0.0))
    denom = local * np.linalg.norm(template)
    with np.errstate(invalid="ignore", divide="ignore"):
        # ignore near-silent stretches where FFT round-off dominates
        ncc = np.where(local > 1e-6 * np.sqrt(L) * np.abs(template).max(), num / denom, 0.0)
    return ncc


def find_preamble(w: Waveform, cfg: FskConfig, threshold: float = SYNC_THRESHOLD) -> int:
    """Offset of the preamble (its first sample) inside ``w``."""
    ncc = normalized_xcorr(w.samples, preamble_waveform(cfg).samples)
    if ncc.size == 0:
        raise FrameNotFound("waveform shorter than the preamble")
    k = int(np.argmax(ncc))
    if ncc[k] < threshold:
        raise FrameNotFound(f"no frame found (peak correlation {ncc[k]:.3f} < {threshold})")
    return k


def synchronize(w: Waveform, cfg: FskConfig, threshold: float = SYNC_THRESHOLD) -> int:
    """Sample index where the frame content after the preamble begins."""
    return find_preamble(w, cfg, threshold) + len(cfg.preamble_symbols) * cfg.samples_per_symbol


def crc16_ccitt(data) -> int:
    """CRC-16/CCITT-FALSE over bytes or over a 0/1 bit array (MSB first)."""
    if isinstance(data, (bytes, bytearray)):
        bits = np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))
    else:
        bits = as_bits(data)
    crc = 0xFFFF
    for b in bits:
        top = (crc >> 15) ^ int(b)
        crc = (crc << 1) & 0xFFFF
        if top:
            crc ^= 0x1021
    return crc


def int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def frame_bits(payload, cfg: FskConfig) -> np.ndarray:
    """Length + payload + CRC, zero padded to whole symbols (no preamble)."""
    payload = as_bits(payload)
    if len(payload) == 0:
        raise ValueError("empty payload")
    if len(payload) > cfg.max_payload_bits:
        raise ValueError(f"payload of {len(payload)} bits exceeds {cfg.max_payload_bits}")
    body = np.concatenate([int_to_bits(len(payload), LENGTH_FIELD_BITS), payload])
    bits = np.concatenate([body, int_to_bits(crc16_ccitt(body), CRC_BITS)])
    pad = (-len(bits)) % cfg.bits_per_symbol
    return np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])


def frame_num_symbols(payload_len: int, cfg: FskConfig) -> int:
    k = cfg.bits_per_symbol
    return len(BARKER_13) + -(-(LENGTH_FIELD_BITS + payload_len + CRC_BITS) // k)


def encode_frame(payload, cfg: FskConfig) -> Waveform:
    symbols = np.concatenate([cfg.preamble_symbols,
                              bits_to_symbols(frame_bits(payload, cfg), cfg.bits_per_symbol)])
    return modulate_symbols(symbols, cfg)


def parse_frame(w: Waveform, cfg: FskConfig, start: int) -> np.ndarray:
    """Demodulate and check a frame whose length field starts at ``start``."""
    k = cfg.bits_per_symbol
    L = cfg.samples_per_symbol
    head_symbols = -(-LENGTH_FIELD_BITS // k)
    if start + head_symbols * L > len(w):
        raise CorruptFrame("frame truncated before the length field", np.zeros(0, np.uint8))
    head = demodulate(w, cfg, start, head_symbols)
    n = bits_to_int(head[:LENGTH_FIELD_BITS])
    if n == 0 or n > cfg.max_payload_bits:
        raise CorruptFrame(f"implausible payload length {n}", head)
    total = -(-(LENGTH_FIELD_BITS + n + CRC_BITS) // k)
    available = (len(w) - start) // L
    bits = demodulate(w, cfg, start, min(total, available))
    if total > available:
        raise CorruptFrame(f"frame truncated: need {total} symbols, have {available}", bits)
    body = bits[:LENGTH_FIELD_BITS + n]
    crc = bits_to_int(bits[LENGTH_FIELD_BITS + n:LENGTH_FIELD_BITS + n + CRC_BITS])
    if crc != crc16_ccitt(body):
        raise CorruptFrame("corrupt frame: CRC mismatch", bits)
    return body[LENGTH_FIELD_BITS:].copy()


def decode_frame(w: Waveform, cfg: FskConfig, threshold: float = SYNC_THRESHOLD) -> np.ndarray:
    """Synchronize on the preamble, demodulate and CRC-check one frame."""
    return parse_frame(w, cfg, synchronize(w, cfg, threshold))


def random_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def random_symbols(n: int, cfg: FskConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, cfg.num_tones, size=n)
