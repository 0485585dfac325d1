"""Uplink rate analysis and phase-shift optimization for surface-assisted
cell-free massive MIMO with transceiver and reflection hardware impairments.
"""

from . import (asymptotics, channel, closedform, experiments, montecarlo,
               optimizer, reform, scenario)

__all__ = [
    "asymptotics", "channel", "closedform", "experiments", "montecarlo",
    "optimizer", "reform", "scenario",
]
