"""Analytics engine for temporal event data from randomized trials.

Summarizes raw per-day clinical events into exclusive statuses, clusters
patients along a knowledge-coded path and a learned graph-embedding path,
explains clusters by gradient attribution over baseline features,
condenses cohort trajectories into progression graphs, and serves
survival and summary statistics over HTTP.
"""

__version__ = "0.1.0"

from .statuses import EventStatus, RawEventType, summarize_day  # noqa: F401
