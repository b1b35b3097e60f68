"""Delay-aware joint mode selection, beamforming and power control for a
C-RAN with underlay D2D pairs, plus the slot-level simulator around it."""

from .config import ConfigError, SimConfig, load_config, parse_config_text
from .lyapunov import DriftWeights, assert_lemma1, drift_weights
from .mode_selection import exhaustive_oracle, modified_bnb
from .net_model import ChannelRealization, NetworkTopology, draw_channels, place_random
from .queues import ArrivalProcess, QueueState, draw_arrivals, update_queues
from .rates import Limits, ResourceAllocation, check_constraints, pair_rates
from .simulation import (NonConvergenceError, run_experiment, run_slot, run_slot_cran_mode,
                         run_slot_d2d_mode, run_slot_jmsra, simulate, sweep)

__version__ = "0.1.0"

__all__ = [
    "ArrivalProcess", "ChannelRealization", "ConfigError", "DriftWeights", "Limits",
    "NetworkTopology", "NonConvergenceError", "QueueState", "ResourceAllocation", "SimConfig",
    "assert_lemma1", "check_constraints", "draw_arrivals", "draw_channels", "drift_weights",
    "exhaustive_oracle", "load_config", "modified_bnb", "pair_rates", "parse_config_text",
    "place_random", "run_experiment", "run_slot", "run_slot_cran_mode", "run_slot_d2d_mode",
    "run_slot_jmsra", "simulate", "sweep", "update_queues",
]
