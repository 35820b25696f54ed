"""Command-line interface: ``acoustic-uplink <command> ...`` (or ``python -m acoustic_uplink``).

Every command is deterministic given its arguments; there are no environment
variable overrides.  Exit status is 0 when all outputs were written, 2 for
usage and configuration errors, 3 when a frame could not be recovered.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import scenario as scenario_mod
from .beamform import AdaptationDiverged, beampattern, write_beampattern_csv, write_weights_csv
from .channel import read_multichannel_wav, write_multichannel_wav
from .fsk import (AUDIBLE_CARRIERS_HZ, ULTRASONIC_CARRIERS_HZ, CorruptFrame, FrameNotFound,
                  FskConfig, encode_frame, frame_num_symbols, parse_frame, synchronize)
from .metrics import (ber, ber_sweep, report_dict, run_pipeline, sinr_of_pipeline,
                      pipeline_ber, write_ber_csv, write_results_json)
from .scenario import Scenario, ScenarioError
from .signal import read_wav, write_wav


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _schema_help() -> str:
    lines = ["scenario JSON (unknown keys are rejected):"]

    def walk(node, prefix, depth):
        props = node.get("properties", {})
        required = set(node.get("required", []))
        for key, sub in props.items():
            t = sub.get("type") or ("enum " + "|".join(map(str, sub["enum"])) if "enum" in sub else "")
            if isinstance(t, list):
                t = "|".join(t)
            req = " (required)" if key in required else ""
            lines.append(f"  {'  ' * depth}{prefix}{key}: {t}{req}")
            if sub.get("type") == "object":
                walk(sub, "", depth + 1)
            elif sub.get("type") == "array" and isinstance(sub.get("items"), dict) \
                    and sub["items"].get("type") == "object":
                walk(sub["items"], "- ", depth + 1)

    walk(scenario_mod.SCHEMA, "", 0)
    lines += ["", "Each source has exactly one of fsk, tone or file.  noise.snr_db null means",
              "noiseless.  beamformer.steer_angle_deg defaults to the data source angle."]
    return "\n".join(lines)


def _load(path) -> Scenario:
    try:
        return Scenario.load(path)
    except FileNotFoundError:
        raise CliError(f"{path}: no such scenario file")


def _out_path(arg: Optional[str], scenario: Optional[Scenario], key: str, what: str) -> Path:
    if arg:
        return Path(arg)
    if scenario is not None:
        value = scenario.config.get("outputs", {}).get(key)
        if value:
            return scenario.base_dir / value
    raise CliError(f"no output path for the {what}: pass --out or set outputs.{key}")


def _fsk_from_flags(args) -> FskConfig:
    if args.carriers:
        carriers = tuple(float(c) for c in args.carriers.split(","))
    else:
        carriers = ULTRASONIC_CARRIERS_HZ if args.preset == "ultrasonic" else AUDIBLE_CARRIERS_HZ
    return FskConfig(carriers_hz=carriers, symbol_duration_s=args.symbol_duration,
                     sample_rate_hz=args.sample_rate, amplitude=args.amplitude)


def _add_fsk_flags(p):
    p.add_argument("--preset", choices=["audible", "ultrasonic"], default="audible",
                   help="carrier set: 0.5-3.5 kHz or 15.5-20 kHz")
    p.add_argument("--carriers", help="comma-separated carrier list in Hz (overrides --preset)")
    p.add_argument("--symbol-duration", type=float, default=0.01, help="seconds per symbol")
    p.add_argument("--sample-rate", type=float, default=48000.0)
    p.add_argument("--amplitude", type=float, default=1.0)


def _payload_bits(text: str) -> np.ndarray:
    path = Path(text)
    if path.is_file():
        data = path.read_bytes()
    else:
        cleaned = text.strip().lower()
        if cleaned.startswith("0x"):
            cleaned = cleaned[2:]
        try:
            data = bytes.fromhex(cleaned)
        except ValueError:
            raise CliError(f"payload {text!r} is neither a file nor valid hex")
    if not data:
        raise CliError("empty payload")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def _bits_hex(bits: np.ndarray) -> str:
    bits = np.asarray(bits, dtype=np.uint8)
    if len(bits) % 8:
        return "".join(map(str, bits.tolist()))
    return np.packbits(bits).tobytes().hex()


def cmd_modulate(args) -> int:
    bits = _payload_bits(args.payload)
    cfg = _fsk_from_flags(args)
    if len(bits) > cfg.max_payload_bits:
        raise CliError(f"payload of {len(bits)} bits exceeds {cfg.max_payload_bits}")
    w = encode_frame(bits, cfg)
    write_wav(args.out, w)
    half = 1 / cfg.symbol_duration_s
    lo, hi = cfg.carriers_hz[0] - half, cfg.carriers_hz[-1] + half
    print(f"wrote {args.out}: {frame_num_symbols(len(bits), cfg)} symbols, "
          f"{w.duration_s:.3f} s, band {lo:.0f}-{hi:.0f} Hz")
    return 0


def _frames_meta(real) -> list:
    return [{"source_index": f.source_index, "start_sample": f.start_sample,
             "payload_bits": "".join(map(str, f.payload_bits.tolist()))} for f in real.frames]


def _apply_seed(sc: Scenario, seed: Optional[int]) -> Scenario:
    return sc if seed is None else sc.reseeded(seed)


def cmd_simulate(args) -> int:
    sc = _apply_seed(_load(args.scenario), args.seed)
    out = _out_path(args.out, sc, "recording_wav", "recording")
    comps, real = sc.simulate()
    rec = comps.total()
    write_multichannel_wav(out, rec)
    meta = Path(args.meta) if args.meta else out.with_suffix(".json")
    write_results_json(meta, sc, {"recording_wav": out.name, "num_channels": rec.geometry.num_mics,
                                  "num_samples": rec.num_samples,
                                  "sample_rate_hz": rec.sample_rate_hz,
                                  "frames": _frames_meta(real)})
    print(f"wrote {out} ({rec.geometry.num_mics} channels, {rec.num_samples} samples) and {meta}")
    return 0


def _read_recording(path, sc: Scenario):
    rec = read_multichannel_wav(path, sc.geometry if _num_channels(path) == sc.geometry.num_mics
                                else None)
    if rec.geometry.num_mics != sc.geometry.num_mics:
        raise CliError(f"{path} has {rec.geometry.num_mics} channels, scenario array has "
                       f"{sc.geometry.num_mics} microphones")
    if rec.sample_rate_hz != sc.sample_rate_hz:
        raise CliError(f"{path} is sampled at {rec.sample_rate_hz} Hz, scenario at "
                       f"{sc.sample_rate_hz} Hz")
    return rec


def _num_channels(path) -> int:
    from scipy.io import wavfile
    _, data = wavfile.read(str(path), mmap=True)
    return 1 if data.ndim == 1 else data.shape[1]


def cmd_beamform(args) -> int:
    sc = _load(args.scenario)
    rec = _read_recording(args.recording, sc)
    spec = sc.pipeline(args.algo)
    result = run_pipeline(rec, spec)
    out = _out_path(args.out, sc, "output_wav", "beamformed output")
    write_wav(out, result.output)
    weights = Path(args.weights) if args.weights else out.with_suffix(".weights.csv")
    write_weights_csv(weights, result.weights)
    print(f"wrote {out} and {weights} ({spec.algo}, steer {spec.steer_angle_deg:g} deg, "
          f"output delay {result.delay_samples} samples)")
    return 0


def cmd_demod(args) -> int:
    if args.scenario:
        cfg = _load(args.scenario).fsk
    else:
        cfg = _fsk_from_flags(args)
    n_ch = _num_channels(args.wav)
    if n_ch == 1:
        w = read_wav(args.wav)
    else:
        rec = read_multichannel_wav(args.wav)
        if not 0 <= args.channel < n_ch:
            raise CliError(f"channel {args.channel} outside 0..{n_ch - 1}")
        w = rec.channel(args.channel)
    if w.sample_rate_hz != cfg.sample_rate_hz:
        raise CliError(f"{args.wav} is sampled at {w.sample_rate_hz} Hz, modem expects "
                       f"{cfg.sample_rate_hz} Hz")
    code, status = 0, "ok"
    try:
        start = synchronize(w, cfg, args.threshold)
        bits = parse_frame(w, cfg, start)
    except FrameNotFound as e:
        raise CliError(str(e), 3)
    except CorruptFrame as e:
        code, status, bits = 3, str(e), e.bits[16:]
    print(f"payload ({len(bits)} bits): {_bits_hex(bits)}")
    if args.truth:
        doc = json.loads(Path(args.truth).read_text())
        frames = doc.get("results", doc).get("frames", [])
        if not frames:
            raise CliError(f"{args.truth} lists no frames")
        tx = np.array([int(c) for c in frames[0]["payload_bits"]], dtype=np.uint8)
        rx = bits[:len(tx)]
        if len(rx) < len(tx):
            rx = np.concatenate([rx, 1 - tx[len(rx):]])
        r = ber(tx, rx)
        print(f"BER {r.ber:.6g} ({r.num_errors}/{r.num_bits})")
    if code:
        print(f"error: {status}", file=sys.stderr)
    return code


def _ber_entry(sc, spec, out, frames):
    return report_dict(pipeline_ber(sc, spec, out, frames)) if frames else None


def cmd_e2e(args) -> int:
    t0 = time.perf_counter()
    sc = _apply_seed(_load(args.scenario), args.seed)
    comps, real = sc.simulate()
    rec = comps.total()
    single_data = len(sc.data_source_indices) == 1
    rows = {}
    mics = []
    base = sc.pipeline("mic")
    for m in range(sc.geometry.num_mics):
        spec = replace(base, mic_index=m)
        out = run_pipeline(rec, spec)
        entry = {"ber": _ber_entry(sc, spec, out, real.frames)}
        if single_data:
            entry["sinr"] = report_dict(sinr_of_pipeline(sc, spec, None, comps))
        mics.append(entry)
    if real.frames:
        best = min(range(len(mics)), key=lambda m: (mics[m]["ber"]["ber"], m))
    elif single_data:
        best = max(range(len(mics)), key=lambda m: (mics[m]["sinr"]["sinr_db"], -m))
    else:
        best = 0
    rows["best_mic"] = dict(mics[best], mic_index=best)
    for algo in ("das", "frost"):
        spec = sc.pipeline(algo)
        out = run_pipeline(rec, spec)
        entry = {"ber": _ber_entry(sc, spec, out, real.frames),
                 "steer_angle_deg": spec.steer_angle_deg}
        if single_data:
            entry["sinr"] = report_dict(sinr_of_pipeline(sc, spec, out.weights, comps))
        if algo == "frost":
            entry.update(num_taps=spec.num_taps, mu=out.mu)
        rows[algo] = entry
    results = {"pipelines": rows, "single_mics": mics,
               "num_symbols": int(sum(len(f.payload_bits) for f in real.frames)
                                  // sc.fsk.bits_per_symbol),
               "runtime_s": time.perf_counter() - t0}
    if single_data:
        results["sinr_gain_db"] = {
            a: rows[a]["sinr"]["sinr_db"] - max(m["sinr"]["sinr_db"] for m in mics)
            for a in ("das", "frost")}
    out = _out_path(args.out, sc, "results_json", "results")
    write_results_json(out, sc, results)
    print(f"{'pipeline':<10} {'BER':>10} {'SINR dB':>9}")
    for name in ("best_mic", "das", "frost"):
        r = rows[name]
        s = r.get("sinr", {}).get("sinr_db", float("nan"))
        label = f"mic{best}" if name == "best_mic" else name
        b = r["ber"]["ber"] if r["ber"] else float("nan")
        print(f"{label:<10} {b:>10.4g} {s if isinstance(s, str) else f'{s:9.2f}':>9}")
    print(f"wrote {out}")
    return 0


def _angles(spec: str) -> np.ndarray:
    try:
        lo, hi, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise CliError(f"--angles wants start:stop:step, got {spec!r}")
    if step <= 0 or hi < lo:
        raise CliError("--angles needs stop >= start and a positive step")
    return np.round(np.arange(lo, hi + step / 2, step), 9)


def cmd_beampattern(args) -> int:
    sc = _apply_seed(_load(args.scenario), args.seed)
    spec = sc.pipeline(args.algo)
    if args.freq <= 0 or args.freq >= sc.sample_rate_hz / 2:
        raise CliError(f"--freq {args.freq} Hz must lie in (0, {sc.sample_rate_hz / 2:g})")
    weights = None
    if spec.algo == "frost":
        comps, _ = sc.simulate()
        weights = run_pipeline(comps.total(), spec).weights
    pattern = beampattern(sc.geometry, args.freq, _angles(args.angles), weights,
                          spec.steer_angle_deg, sc.sample_rate_hz)
    out = _out_path(args.out, sc, "csv", "beampattern")
    write_beampattern_csv(out, pattern)
    print(f"wrote {out} ({len(pattern)} angles, {args.algo} at {args.freq:g} Hz)")
    return 0


def _grid(text: str) -> List[float]:
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"--snr-grid wants comma-separated dB values, got {text!r}")
    if not grid:
        raise CliError("--snr-grid is empty")
    return grid


def cmd_ber_sweep(args) -> int:
    sc = _load(args.scenario)
    if args.trials < 1:
        raise CliError("--trials must be at least 1")
    reports = ber_sweep(sc, _grid(args.snr_grid), args.trials, args.seed, args.algo, args.workers)
    out = _out_path(args.out, sc, "csv", "BER report")
    write_ber_csv(out, reports)
    if args.json:
        write_results_json(args.json, sc, {"algo": args.algo or sc.pipeline().algo,
                                           "base_seed": args.seed,
                                           "reports": [report_dict(r) for r in reports]})
    for r in reports:
        print(f"SNR {r.snr_db:6.1f} dB  BER {r.ber:.4g}  ({r.num_errors}/{r.num_bits})")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="acoustic-uplink",
        description="Acoustic FSK uplink simulator with a microphone-array receiver.",
        epilog=_schema_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text, epilog=_schema_help(),
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(func=fn)
        return sp

    m = add("modulate", cmd_modulate, "encode a payload (hex string or file) as an FSK frame WAV")
    m.add_argument("payload", help="hex string, or path to a file whose bytes are sent")
    m.add_argument("--out", required=True, help="mono float32 WAV to write")
    _add_fsk_flags(m)

    s = add("simulate", cmd_simulate, "simulate the array recording for a scenario")
    s.add_argument("scenario")
    s.add_argument("--out", help="multichannel WAV (default outputs.recording_wav)")
    s.add_argument("--meta", help="metadata JSON (default: WAV path with .json)")
    s.add_argument("--seed", type=int, help="reseed noise and FSK sources")

    b = add("beamform", cmd_beamform, "beamform a multichannel recording")
    b.add_argument("recording")
    b.add_argument("scenario")
    b.add_argument("--algo", choices=["frost", "das"], default="frost")
    b.add_argument("--out", help="mono WAV (default outputs.output_wav)")
    b.add_argument("--weights", help="weights CSV (default: WAV path with .weights.csv)")

    d = add("demod", cmd_demod, "synchronize and decode one frame from a WAV")
    d.add_argument("wav", help="mono WAV, or multichannel WAV with --channel")
    d.add_argument("--scenario", help="take the modem configuration from this scenario")
    d.add_argument("--channel", type=int, default=0)
    d.add_argument("--truth", help="metadata JSON from simulate; prints BER")
    d.add_argument("--threshold", type=float, default=0.5, help="sync correlation threshold")
    _add_fsk_flags(d)

    e = add("e2e", cmd_e2e, "simulate, beamform and score: single mics vs DAS vs Frost")
    e.add_argument("scenario")
    e.add_argument("--out", help="results JSON (default outputs.results_json)")
    e.add_argument("--seed", type=int, help="reseed noise and FSK sources")

    bp = add("beampattern", cmd_beampattern, "array gain versus angle at one frequency")
    bp.add_argument("scenario")
    bp.add_argument("--freq", type=float, required=True, help="frequency in Hz")
    bp.add_argument("--algo", choices=["frost", "das"], default="das")
    bp.add_argument("--angles", default="-90:90:1", help="start:stop:step in degrees; write --angles=-60:60:1 "
                    "for a negative start")
    bp.add_argument("--out", help="CSV (default outputs.csv)")
    bp.add_argument("--seed", type=int, help="reseed noise and FSK sources (frost only)")

    w = add("ber-sweep", cmd_ber_sweep, "BER versus SNR over seeded Monte Carlo trials")
    w.add_argument("scenario")
    w.add_argument("--snr-grid", default="-10,-5,0,5,10,15,20", help="comma-separated dB")
    w.add_argument("--trials", type=int, default=1)
    w.add_argument("--seed", type=int, default=0, help="base seed")
    w.add_argument("--algo", choices=["mic", "das", "frost"],
                   help="receiver (default: the scenario's beamformer.algo)")
    w.add_argument("--workers", type=int, default=1, help="worker processes")
    w.add_argument("--out", help="CSV (default outputs.csv)")
    w.add_argument("--json", help="also write a results JSON")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ScenarioError, AdaptationDiverged, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
