"""declab: a desk-scale, end-to-end decision platform.

Spec a use case, log predict/observe events, train and evaluate models,
derive decision policies, tune them against product metrics, and run the
freshness/canary lifecycle -- all deterministic under seed.
"""

from . import (autoconf, core, errors, eventlog, hte, lifecycle, models,
               offeval, policy, prep, rl, simlab, tuning)
from .platform import Platform

__version__ = "0.1.0"

__all__ = [
    "autoconf", "core", "errors", "eventlog", "hte", "lifecycle", "models",
    "offeval", "policy", "prep", "rl", "simlab", "tuning", "Platform",
    "__version__",
]
