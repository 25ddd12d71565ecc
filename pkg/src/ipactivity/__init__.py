"""Spatio-temporal IPv4 address activity analytics.

Builds per-/24 activity matrices from daily hit logs and derives churn
events, utilization metrics, change detection, traffic concentration, and
block demographics from them. Ships a deterministic synthetic workload
generator whose scenarios carry machine-checkable ground truth.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .errors import DataError, IngestError
from .store import ActivityStore, ActivityMatrix, DayRange, UASampleSet, ingest_activity, ingest_ua_samples

__version__ = "0.1.0"

__all__ = [
    "ActivityMatrix",
    "ActivityStore",
    "DataError",
    "DayRange",
    "IngestError",
    "KERNEL_BACKEND",
    "UASampleSet",
    "__version__",
    "ingest_activity",
    "ingest_ua_samples",
]
