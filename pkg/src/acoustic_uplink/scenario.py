"""Scenario files: JSON description of an array, its sources, noise and receiver.

Example (the built-in demo scenario)::

    {
      "id": "demo-default",
      "sample_rate_hz": 8000,
      "geometry": {"num_mics": 10, "spacing_m": 0.05, "speed_of_sound_mps": 343.0},
      "fsk": {"preset": "audible", "symbol_duration_s": 0.01, "amplitude": 1.0},
      "sources": [
        {"angle_deg": -10, "role": "data", "gain": 1.0,
         "fsk": {"seed": 1, "payload_bits": 2000, "start_s": 2.0}},
        {"angle_deg": -30, "role": "interference", "gain": 1.0,
         "fsk": {"seed": 2, "start_s": 0.0036}},
        {"angle_deg": 20, "role": "interference", "gain": 1.0,
         "fsk": {"seed": 3, "start_s": 0.0065}}
      ],
      "noise": {"snr_db": 20, "seed": 7},
      "beamformer": {"algo": "frost", "num_taps": 32, "alpha": 0.03}
    }

Each source carries exactly one of ``fsk``, ``tone`` or ``file``.  A framed FSK
source (the default for role "data") sends ``frames`` CRC frames of
``payload_bits`` random bits back to back from ``start_s``.  An unframed FSK
source (the default for interference) sends random symbols from ``start_s``
to the end of the scenario; its bursts get independent random phases unless
``random_phase`` is false, modelling a transmitter whose oscillator is not
locked to ours.  Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import jsonschema
import numpy as np

from .channel import ArrayGeometry, SourceSpec, simulate_components
from .fsk import (AUDIBLE_CARRIERS_HZ, ULTRASONIC_CARRIERS_HZ, FskConfig, encode_frame,
                  random_bits)
from .signal import Waveform, make_rng, read_wav, tone

TAIL_S = 0.05

_number = {"type": "number"}
_seed = {"type": "integer", "minimum": 0}
_start = {"type": "number", "minimum": 0}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "acoustic uplink scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["sample_rate_hz", "geometry", "sources"],
    "properties": {
        "id": {"type": "string"},
        "sample_rate_hz": {"type": "number", "exclusiveMinimum": 0},
        "duration_s": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "num_mics": {"type": "integer", "minimum": 1},
                "spacing_m": {"type": "number", "exclusiveMinimum": 0},
                "speed_of_sound_mps": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "fsk": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["audible", "ultrasonic"]},
                "carriers_hz": {"type": "array", "items": _number, "minItems": 2},
                "symbol_duration_s": {"type": "number", "exclusiveMinimum": 0},
                "amplitude": {"type": "number", "exclusiveMinimum": 0},
            },
            "not": {"required": ["preset", "carriers_hz"]},
        },
        "sources": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["angle_deg"],
                "properties": {
                    "angle_deg": {"type": "number", "minimum": -90, "maximum": 90},
                    "role": {"enum": ["data", "interference"]},
                    "gain": _number,
                    "fsk": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["seed"],
                        "properties": {
                            "seed": _seed,
                            "payload_bits": {"type": "integer", "minimum": 1, "maximum": 4096},
                            "frames": {"type": "integer", "minimum": 1},
                            "frame_gap_s": _start,
                            "start_s": _start,
                            "framed": {"type": "boolean"},
                            "random_phase": {"type": "boolean"},
                        },
                    },
                    "tone": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["freq_hz"],
                        "properties": {
                            "freq_hz": {"type": "number", "exclusiveMinimum": 0},
                            "amplitude": _number,
                            "phase_rad": _number,
                            "start_s": _start,
                            "duration_s": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                    "file": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["path"],
                        "properties": {"path": {"type": "string"}, "start_s": _start},
                    },
                },
                "oneOf": [{"required": ["fsk"]}, {"required": ["tone"]}, {"required": ["file"]}],
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "snr_db": {"type": ["number", "null"]},
                "seed": _seed,
            },
        },
        "beamformer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "algo": {"enum": ["frost", "das", "mic"]},
                "steer_angle_deg": {"type": "number", "exclusiveMinimum": -90,
                                    "exclusiveMaximum": 90},
                "num_taps": {"type": "integer", "minimum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "step_size": {"type": ["number", "null"], "minimum": 0},
                "desired_response": {"type": ["array", "null"], "items": _number},
                "mic_index": {"type": "integer", "minimum": 0},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "recording_wav": {"type": "string"},
                "output_wav": {"type": "string"},
                "weights_csv": {"type": "string"},
                "results_json": {"type": "string"},
                "csv": {"type": "string"},
            },
        },
    },
}


class ScenarioError(ValueError):
    pass


def validate(config: dict) -> None:
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ScenarioError(f"scenario invalid at {where}: {e.message}") from None
    data = [s for s in config["sources"] if s.get("role", "data") == "data"]
    for s in data:
        if "fsk" in s and s["fsk"].get("framed", True) and "payload_bits" not in s["fsk"]:
            raise ScenarioError("framed FSK data source needs payload_bits")


@dataclass(frozen=True)
class PipelineSpec:
    """Receiver: a single microphone, delay-and-sum, or Frost."""

    algo: str = "frost"
    steer_angle_deg: float = 0.0
    num_taps: int = 16
    alpha: float = 0.01
    step_size: Optional[float] = None
    desired_response: Optional[tuple] = None
    mic_index: int = 0

    def frost_config(self):
        from .beamform import FrostConfig
        return FrostConfig(num_taps_J=self.num_taps, step_size_mu=self.step_size,
                           alpha=self.alpha, desired_response_f=self.desired_response,
                           steer_angle_deg=self.steer_angle_deg)

    def label(self) -> str:
        return f"mic{self.mic_index}" if self.algo == "mic" else self.algo


@dataclass(frozen=True)
class FrameTruth:
    """A transmitted frame: where it starts (samples) and its payload."""

    start_sample: int
    payload_bits: np.ndarray
    source_index: int


@dataclass(frozen=True, eq=False)
class Realization:
    sources: List[SourceSpec]
    frames: List[FrameTruth]
    num_samples: int


class Scenario:
    """A validated scenario; ``config`` is the plain JSON-compatible dict."""

    def __init__(self, config: dict, base_dir: Optional[Path] = None):
        validate(config)
        self.config = copy.deepcopy(config)
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self.sample_rate_hz = float(config["sample_rate_hz"])
        g = config.get("geometry", {})
        self.geometry = ArrayGeometry(**g)
        self.fsk = _fsk_config(config.get("fsk", {}), self.sample_rate_hz)
        noise = config.get("noise", {})
        snr = noise.get("snr_db")
        self.snr_db = math.inf if snr is None else float(snr)
        self.noise_seed = int(noise.get("seed", 0))
        self.id = config.get("id", "scenario")

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        try:
            config = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ScenarioError(f"{path}: not valid JSON ({e})") from None
        return cls(config, path.parent)

    def to_json(self) -> str:
        return json.dumps(self.config, indent=2)

    def replace(self, **changes) -> "Scenario":
        cfg = copy.deepcopy(self.config)
        cfg.update(changes)
        return Scenario(cfg, self.base_dir)

    def with_snr(self, snr_db: Optional[float]) -> "Scenario":
        noise = dict(self.config.get("noise", {}))
        noise["snr_db"] = None if snr_db is None or snr_db == math.inf else float(snr_db)
        return self.replace(noise=noise)

    def reseeded(self, seed: int) -> "Scenario":
        """Copy with noise and every FSK source reseeded from ``seed``."""
        cfg = copy.deepcopy(self.config)
        states = np.random.SeedSequence([int(seed)]).generate_state(len(cfg["sources"]) + 1)
        cfg.setdefault("noise", {})["seed"] = int(states[0])
        for s, st in zip(cfg["sources"], states[1:]):
            if "fsk" in s:
                s["fsk"]["seed"] = int(st)
        return Scenario(cfg, self.base_dir)

    @property
    def data_source_indices(self) -> List[int]:
        return [i for i, s in enumerate(self.config["sources"]) if s.get("role", "data") == "data"]

    def pipeline(self, algo: Optional[str] = None) -> PipelineSpec:
        bf = dict(self.config.get("beamformer", {}))
        if algo is not None:
            bf["algo"] = algo
        if "steer_angle_deg" not in bf:
            data = self.data_source_indices
            bf["steer_angle_deg"] = self.config["sources"][data[0]]["angle_deg"] if data else 0.0
        dr = bf.pop("desired_response", None)
        return PipelineSpec(algo=bf.pop("algo", "frost"),
                            steer_angle_deg=float(bf.pop("steer_angle_deg")),
                            num_taps=int(bf.pop("num_taps", 16)),
                            alpha=float(bf.pop("alpha", 0.01)),
                            step_size=bf.pop("step_size", None),
                            desired_response=tuple(dr) if dr else None,
                            mic_index=int(bf.pop("mic_index", 0)))

    def build(self) -> Realization:
        """Synthesize every source waveform (before propagation)."""
        fs = self.sample_rate_hz
        cfg = self.fsk
        specs = self.config["sources"]
        frames: List[FrameTruth] = []
        bounded_end = 0
        pieces = []
        for i, s in enumerate(specs):
            role = s.get("role", "data")
            if "fsk" in s:
                f = s["fsk"]
                framed = f.get("framed", role == "data")
                start = _samples(f.get("start_s", 0.0), fs)
                if framed:
                    chunks, truth = _framed_fsk(f, cfg, start, i)
                    frames.extend(truth)
                    end = truth[-1].start_sample + sum(len(c) for c in chunks[-1:])
                    bounded_end = max(bounded_end, end + _samples(TAIL_S, fs))
                    pieces.append(("chunks", chunks, truth))
                else:
                    pieces.append(("stream", f, start))
            elif "tone" in s:
                t = s["tone"]
                start = _samples(t.get("start_s", 0.0), fs)
                if "duration_s" in t:
                    bounded_end = max(bounded_end, start + _samples(t["duration_s"], fs))
                pieces.append(("tone", t, start))
            else:
                path = Path(s["file"]["path"])
                if not path.is_absolute():
                    path = self.base_dir / path
                w = read_wav(path)
                if w.sample_rate_hz != fs:
                    raise ScenarioError(f"{path}: sample rate {w.sample_rate_hz} != {fs}")
                start = _samples(s["file"].get("start_s", 0.0), fs)
                bounded_end = max(bounded_end, start + len(w))
                pieces.append(("file", w, start))
        if self.config.get("duration_s"):
            total = _samples(self.config["duration_s"], fs)
        elif bounded_end:
            total = bounded_end
        else:
            raise ScenarioError("scenario has no bounded source; set duration_s")

        sources = []
        for s, piece in zip(specs, pieces):
            kind = piece[0]
            buf = np.zeros(total)
            if kind == "chunks":
                for chunk, tr in zip(piece[1], piece[2]):
                    _place(buf, chunk.samples, tr.start_sample)
            elif kind == "stream":
                f, start = piece[1], piece[2]
                _place(buf, _fsk_stream(f, cfg, total - start).samples, start)
            elif kind == "tone":
                t, start = piece[1], piece[2]
                n = total - start
                if "duration_s" in t:
                    n = min(n, _samples(t["duration_s"], fs))
                if n > 0:
                    w = tone(t["freq_hz"], n / fs, t.get("amplitude", 1.0),
                             t.get("phase_rad", 0.0), fs)
                    _place(buf, w.samples, start)
            else:
                _place(buf, piece[1].samples, piece[2])
            sources.append(SourceSpec(float(s["angle_deg"]), Waveform(buf, fs),
                                      float(s.get("gain", 1.0)), s.get("role", "data")))
        return Realization(sources, frames, total)

    def simulate(self) -> tuple:
        """(ReceptionComponents, Realization) for this scenario."""
        real = self.build()
        comps = simulate_components(self.geometry, real.sources, self.snr_db, self.noise_seed)
        return comps, real


def _fsk_config(d: dict, fs: float) -> FskConfig:
    carriers = d.get("carriers_hz")
    if carriers is None:
        carriers = ULTRASONIC_CARRIERS_HZ if d.get("preset") == "ultrasonic" else AUDIBLE_CARRIERS_HZ
    try:
        return FskConfig(carriers_hz=tuple(carriers),
                         symbol_duration_s=float(d.get("symbol_duration_s", 0.01)),
                         sample_rate_hz=fs, amplitude=float(d.get("amplitude", 1.0)))
    except ValueError as e:
        raise ScenarioError(f"fsk config: {e}") from None


def _samples(seconds: float, fs: float) -> int:
    return int(round(seconds * fs))


def _place(buf: np.ndarray, x: np.ndarray, start: int) -> None:
    n = max(0, min(len(x), len(buf) - start))
    buf[start:start + n] += x[:n]


def _framed_fsk(f: dict, cfg: FskConfig, start: int, source_index: int):
    rng = make_rng(f["seed"])
    gap = _samples(f.get("frame_gap_s", 0.0), cfg.sample_rate_hz)
    chunks, truth = [], []
    pos = start
    for _ in range(f.get("frames", 1)):
        payload = random_bits(f["payload_bits"], rng)
        w = encode_frame(payload, cfg)
        chunks.append(w)
        truth.append(FrameTruth(pos, payload, source_index))
        pos += len(w) + gap
    return chunks, truth


def _fsk_stream(f: dict, cfg: FskConfig, num_samples: int) -> Waveform:
    from .fsk import modulate_symbols, random_symbols
    if num_samples <= 0:
        return Waveform(np.zeros(0), cfg.sample_rate_hz)
    rng = make_rng(f["seed"])
    n = -(-num_samples // cfg.samples_per_symbol)
    symbols = random_symbols(n, cfg, rng)
    phases = rng.uniform(0, 2 * np.pi, n) if f.get("random_phase", True) else None
    return modulate_symbols(symbols, cfg, phases).slice(0, num_samples)


def demo_scenario_config() -> dict:
    return {
        "id": "demo-default",
        "sample_rate_hz": 8000,
        "geometry": {"num_mics": 10, "spacing_m": 0.05, "speed_of_sound_mps": 343.0},
        "fsk": {"preset": "audible", "symbol_duration_s": 0.01, "amplitude": 1.0},
        "sources": [
            {"angle_deg": -10, "role": "data", "gain": 1.0,
             "fsk": {"seed": 1, "payload_bits": 2000, "start_s": 2.0}},
            {"angle_deg": -30, "role": "interference", "gain": 1.0,
             "fsk": {"seed": 2, "start_s": 0.0036}},
            {"angle_deg": 20, "role": "interference", "gain": 1.0,
             "fsk": {"seed": 3, "start_s": 0.0065}},
        ],
        "noise": {"snr_db": 20, "seed": 7},
        "beamformer": {"algo": "frost", "num_taps": 32, "alpha": 0.03},
    }


def demo_scenario() -> Scenario:
    return Scenario(demo_scenario_config())
