"""Proactive assistant runtime.

Timestamped observations go in; the runtime decides when a service moment has
arrived, plans and runs the sub-tasks that serve it (scene description, web
search, memory recall, timers), and delivers one condensed instruction.
"""

from .config import RunConfig, SearchConfig
from .core.machine import Machine, run_session
from .core.types import Event, EventKind, SessionTrace, TraceEntry, Unit
from .scenario import Scenario, compare_trace, load_scenario, replay

__all__ = [
    "Event",
    "EventKind",
    "Machine",
    "RunConfig",
    "Scenario",
    "SearchConfig",
    "SessionTrace",
    "TraceEntry",
    "Unit",
    "compare_trace",
    "load_scenario",
    "replay",
    "run_session",
]

__version__ = "0.1.0"
