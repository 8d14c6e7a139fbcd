"""Graph neural networks over nodes with heterogeneous, changing feature sets."""

from ._core import (
    ConfigError,
    DataError,
    Graph,
    allotropic_counts,
    check_config,
    config_reference,
    load_graph,
    method_names,
    run,
    stream,
    toy_graph,
    translate_features,
    write_allotropic,
    write_graph,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Graph",
    "allotropic_counts",
    "check_config",
    "config_reference",
    "load_graph",
    "method_names",
    "run",
    "stream",
    "toy_graph",
    "translate_features",
    "write_allotropic",
    "write_graph",
]
