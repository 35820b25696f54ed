"""Bit error rate, SINR by component-wise re-simulation, and seeded BER sweeps.

Receiver pipelines
------------------
A :class:`~acoustic_uplink.scenario.PipelineSpec` selects one microphone
("mic"), delay-and-sum ("das") or Frost ("frost").  BER uses genie timing: the
known frame start plus the pipeline's processing delay, so it measures the
modem and beamformer rather than the synchronizer.

Sweep seeding
-------------
Trial ``t`` at grid point ``i`` uses the seed
``SeedSequence([base_seed, i, t]).generate_state(1)[0]``, which the scenario
then expands into noise and source seeds (:meth:`Scenario.reseeded`).  Every
trial is therefore a pure function of its indices and the results do not
depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np

from .beamform import (apply_weights, bulk_delay, delay_and_sum, delay_and_sum_weights,
                       frost_run, steady_state_start)
from .channel import MultichannelRecording, steering_delays
from .fsk import BARKER_13, LENGTH_FIELD_BITS, FskConfig, demodulate
from .scenario import FrameTruth, PipelineSpec, Scenario, ScenarioError
from .signal import Waveform


@dataclass(frozen=True)
class BerReport:
    num_bits: int
    num_errors: int
    ber: float
    snr_db: float = math.inf
    scenario_id: str = ""
    num_trials: int = 1

    def __post_init__(self):
        if not 0 <= self.num_errors <= self.num_bits:
            raise ValueError("need 0 <= num_errors <= num_bits")


@dataclass(frozen=True)
class SinrReport:
    signal_power: float
    interference_plus_noise_power: float
    sinr_db: float


def ber(tx, rx, snr_db: float = math.inf, scenario_id: str = "") -> BerReport:
    tx = np.asarray(tx, dtype=np.uint8).reshape(-1)
    rx = np.asarray(rx, dtype=np.uint8).reshape(-1)
    if tx.shape != rx.shape:
        raise ValueError(f"bit sequences differ in length: {tx.size} vs {rx.size}")
    if tx.size == 0:
        raise ValueError("BER of an empty sequence is undefined")
    errors = int(np.count_nonzero(tx != rx))
    return BerReport(int(tx.size), errors, errors / tx.size, snr_db, scenario_id)


def sinr_db(signal_power: float, inpower: float) -> float:
    if inpower == 0:
        return math.inf
    if signal_power == 0:
        return -math.inf
    return 10 * math.log10(signal_power / inpower)


@dataclass(eq=False)
class PipelineOutput:
    output: Waveform
    delay_samples: int
    weights: Optional[np.ndarray]  # frozen (N, J) weights, None for a single mic
    mu: Optional[float] = None
    max_constraint_residual: float = 0.0


def run_pipeline(rec: MultichannelRecording, spec: PipelineSpec,
                 track_constraint: bool = False) -> PipelineOutput:
    """Process a recording; for Frost ``weights`` are the steady-state mean."""
    fs = rec.sample_rate_hz
    if spec.algo == "mic":
        _check_mic(rec, spec.mic_index)
        return PipelineOutput(rec.channel(spec.mic_index), 0, None)
    delay = bulk_delay(rec.geometry, spec.steer_angle_deg, fs)
    if spec.algo == "das":
        return PipelineOutput(delay_and_sum(rec, spec.steer_angle_deg), delay,
                              delay_and_sum_weights(rec.geometry.num_mics))
    if spec.algo == "frost":
        res = frost_run(rec, spec.frost_config(), track_constraint=track_constraint)
        return PipelineOutput(res.output, delay, res.mean_weights, res.mu,
                              res.max_constraint_residual)
    raise ValueError(f"unknown algorithm {spec.algo!r}")


def apply_frozen(rec: MultichannelRecording, spec: PipelineSpec,
                 weights: Optional[np.ndarray]) -> Waveform:
    """Run a pipeline with fixed weights (a linear, time-invariant filter)."""
    if spec.algo == "mic":
        _check_mic(rec, spec.mic_index)
        return rec.channel(spec.mic_index)
    return apply_weights(rec, weights, spec.steer_angle_deg)


def _check_mic(rec: MultichannelRecording, index: int) -> None:
    if not 0 <= index < rec.geometry.num_mics:
        raise ValueError(f"mic index {index} outside 0..{rec.geometry.num_mics - 1}")


def frame_payload_start(frame: FrameTruth, cfg: FskConfig) -> int:
    """Sample where the payload's first symbol starts (length field is whole symbols)."""
    L = cfg.samples_per_symbol
    return frame.start_sample + (len(BARKER_13) + LENGTH_FIELD_BITS // cfg.bits_per_symbol) * L


def demod_payloads(output: Waveform, frames: Sequence[FrameTruth], cfg: FskConfig,
                   delay_samples: int = 0) -> tuple:
    """(tx, rx) payload bits of every frame, demodulated at the known timing."""
    if LENGTH_FIELD_BITS % cfg.bits_per_symbol:
        raise ValueError("genie-timed payload BER needs the length field on symbol boundaries")
    k = cfg.bits_per_symbol
    tx, rx = [], []
    for fr in frames:
        n = len(fr.payload_bits)
        nsym = -(-n // k)
        bits = demodulate(output, cfg, frame_payload_start(fr, cfg) + delay_samples, nsym)
        tx.append(fr.payload_bits)
        rx.append(bits[:n])
    return np.concatenate(tx), np.concatenate(rx)


def pipeline_delay_for_source(scenario: Scenario, spec: PipelineSpec, source_index: int,
                              delay_samples: int) -> int:
    """Extra arrival delay of the data source at a single mic, rounded to samples."""
    if spec.algo != "mic":
        return delay_samples
    angle = scenario.config["sources"][source_index]["angle_deg"]
    tau = steering_delays(scenario.geometry, angle)[spec.mic_index]
    return delay_samples + int(round(tau * scenario.sample_rate_hz))


def pipeline_ber(scenario: Scenario, spec: PipelineSpec, out: PipelineOutput,
                 frames: Sequence[FrameTruth]) -> BerReport:
    if not frames:
        raise ScenarioError("scenario has no framed data source to score")
    tx, rx = [], []
    for fr in frames:
        d = pipeline_delay_for_source(scenario, spec, fr.source_index, out.delay_samples)
        a, b = demod_payloads(out.output, [fr], scenario.fsk, d)
        tx.append(a)
        rx.append(b)
    return ber(np.concatenate(tx), np.concatenate(rx), scenario.snr_db, scenario.id)


def _single_data_source(scenario: Scenario) -> int:
    data = scenario.data_source_indices
    if len(data) != 1:
        raise ScenarioError(f"SINR needs exactly one data source, found {len(data)}")
    return data[0]


def sinr_of_pipeline(scenario: Scenario, pipeline: Optional[PipelineSpec] = None,
                     weights: Optional[np.ndarray] = None, components=None) -> SinrReport:
    """SINR of a pipeline measured on separately filtered data and I+N components.

    Frost weights are adapted on the full mixture (unless ``weights`` is given),
    frozen, and then applied to the data-only and the interference-plus-noise
    channels.  Powers use the steady-state window.  ``components`` may pass a
    precomputed ``scenario.simulate()[0]``.
    """
    _single_data_source(scenario)
    spec = pipeline or scenario.pipeline()
    comps = components if components is not None else scenario.simulate()[0]
    if weights is None and spec.algo != "mic":
        weights = run_pipeline(comps.total(), spec).weights
    data = apply_frozen(comps.clean("data"), spec, weights).samples
    inn = apply_frozen(comps.interference_plus_noise(), spec, weights).samples
    J = 1 if weights is None else np.atleast_2d(weights).shape[1]
    start = steady_state_start(len(data), J)
    ps = float(np.mean(data[start:] ** 2))
    pin = float(np.mean(inn[start:] ** 2))
    return SinrReport(ps, pin, sinr_db(ps, pin))


@dataclass(frozen=True)
class _Trial:
    config: dict
    base_dir: str
    algo: Optional[str]
    snr_db: Optional[float]
    seed: int


def trial_seed(base_seed: int, point: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(point), int(trial)]).generate_state(1)[0])


def _run_trial(t: _Trial) -> tuple:
    sc = Scenario(t.config, t.base_dir).with_snr(t.snr_db).reseeded(t.seed)
    spec = sc.pipeline(t.algo)
    comps, real = sc.simulate()
    out = run_pipeline(comps.total(), spec)
    r = pipeline_ber(sc, spec, out, real.frames)
    return r.num_bits, r.num_errors


def ber_sweep(scenario: Scenario, snr_grid: Sequence[float], trials_per_point: int,
              base_seed: int, algo: Optional[str] = None, workers: int = 1) -> List[BerReport]:
    """One aggregated BerReport per SNR point (bits and errors summed over trials)."""
    if len(snr_grid) == 0:
        raise ValueError("SNR grid is empty")
    if trials_per_point < 1:
        raise ValueError("need at least one trial per point")
    jobs = [_Trial(scenario.config, str(scenario.base_dir), algo, snr,
                   trial_seed(base_seed, i, t))
            for i, snr in enumerate(snr_grid) for t in range(trials_per_point)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(j) for j in jobs]
    reports = []
    for i, snr in enumerate(snr_grid):
        chunk = results[i * trials_per_point:(i + 1) * trials_per_point]
        bits = sum(b for b, _ in chunk)
        errs = sum(e for _, e in chunk)
        reports.append(BerReport(bits, errs, errs / bits, float(snr), scenario.id,
                                 trials_per_point))
    return reports


BER_CSV_FIELDS = ["scenario_id", "snr_db", "num_trials", "num_bits", "num_errors", "ber"]


def write_ber_csv(path, reports: Sequence[BerReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BER_CSV_FIELDS)
        for r in reports:
            w.writerow([r.scenario_id, f"{r.snr_db:g}", r.num_trials, r.num_bits,
                        r.num_errors, repr(r.ber)])


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    return value


def results_document(scenario: Scenario, results: dict) -> dict:
    """JSON-ready results with the full scenario config embedded for provenance."""
    return _jsonable({"scenario": scenario.config, "results": results})


def write_results_json(path, scenario: Scenario, results: dict) -> None:
    with open(path, "w") as fh:
        json.dump(results_document(scenario, results), fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_dict(report) -> dict:
    return _jsonable(asdict(report))
