"""Heavy-flow detection for match-and-action switches: samplers, a switch
pipeline, Space-Saving controllers and an experiment harness."""

from .baselines import SampleHHController, SampleHoldController
from .controller import PickConfig, SamplePickController, derive_params
from .heavy_hitters import IntervalHH, SpaceSaving
from .model import FlowKey, Packet, Trace, ZipfConfig, generate_zipf_trace
from .switch import Outcome, SwitchState

__all__ = [
    "FlowKey", "IntervalHH", "Outcome", "Packet", "PickConfig", "SampleHHController",
    "SampleHoldController", "SamplePickController", "SpaceSaving", "SwitchState", "Trace",
    "ZipfConfig", "derive_params", "generate_zipf_trace",
]
