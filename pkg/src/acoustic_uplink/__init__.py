"""Acoustic FSK uplink simulator with a uniform linear microphone array receiver."""

from .beamform import FrostConfig, beampattern, delay_and_sum, frost_process, frost_run
from .channel import ArrayGeometry, MultichannelRecording, SourceSpec, simulate_reception
from .fsk import FskConfig, decode_frame, demodulate, encode_frame, goertzel_energy, modulate
from .metrics import BerReport, SinrReport, ber, ber_sweep, sinr_of_pipeline
from .scenario import Scenario, demo_scenario
from .signal import Waveform, fractional_delay, mix, tone

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "BerReport", "FrostConfig", "FskConfig", "MultichannelRecording",
    "Scenario", "SinrReport", "SourceSpec", "Waveform", "ber", "ber_sweep", "beampattern",
    "decode_frame", "delay_and_sum", "demodulate", "encode_frame", "fractional_delay",
    "frost_process", "frost_run", "goertzel_energy", "mix", "modulate", "demo_scenario",
    "simulate_reception", "sinr_of_pipeline", "tone",
]
