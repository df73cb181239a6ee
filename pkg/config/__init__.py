# FluctNet Configuration Module
from .fluctnet_config import (
    __version__,
    ConfigError,
    FunctionalTag,
    NetworkPreset,
    OutputFormat,
    RunConfig,
    SolverTolerances,
    ChainParams,
    TriangularParams,
    ExplicitNetwork,
    BoundaryEntry,
    QuasiMarkovParams,
    config,
    load_config,
)

__all__ = [
    "__version__",
    "ConfigError",
    "FunctionalTag",
    "NetworkPreset",
    "OutputFormat",
    "RunConfig",
    "SolverTolerances",
    "ChainParams",
    "TriangularParams",
    "ExplicitNetwork",
    "BoundaryEntry",
    "QuasiMarkovParams",
    "config",
    "load_config",
]
