"""Churn-resilient distributed skip list: simulator and protocol library.

The package maintains three skip-list views (live / clean / buffer) over a
wrapped-butterfly committee overlay, under round-synchronous adversarial
churn, and audits the work spent against the churn absorbed.
"""

from .maintenance import Simulation
from .params import SimParams

__all__ = ["SimParams", "Simulation"]
__version__ = "0.1.0"
