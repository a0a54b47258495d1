"""Cross-silo federated learning toolkit: FedAvg orchestration, low-rank
adapters, dual-Dirichlet partitioning, and object-store parameter exchange."""

from ._fedsilo import *  # noqa: F401,F403
from ._fedsilo import __version__  # noqa: F401
