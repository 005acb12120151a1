"""datastation: a single-node sealed-data station.

Contributed datasets are sealed on entry; users submit data-unaware task
capsules instead of downloading data. The engine discovers and blends
suitable datasets, executes within a budget, and releases results only
through access policies, capability tokens, and privacy budgets. When it
cannot decide alone, it posts priced human tasks and resumes once answered.
"""

from .config import StationConfig, UserIdentity, load_config
from .station import Station

__all__ = ["Station", "StationConfig", "UserIdentity", "load_config"]
__version__ = "0.1.0"
