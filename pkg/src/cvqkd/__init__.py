"""Simulator and analysis toolkit for Gaussian-modulated coherent-state
key distribution with sliced-error-correction reconciliation."""

__version__ = "0.1.0"

from .channel import ChannelModel, ModulationSpec, from_loss_db
from .mathcore import RandomStream
from .slicing import SliceSpec, default_equiprobable_spec

__all__ = [
    "ChannelModel",
    "ModulationSpec",
    "RandomStream",
    "SliceSpec",
    "default_equiprobable_spec",
    "from_loss_db",
    "__version__",
]
