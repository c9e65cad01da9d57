"""Semantic landmark mapping for vineyard rows."""

import json

from ._core import (
    ConfigError,
    DataError,
    SolverError,
    ablate,
    cartesian_to_bearing_range,
    centroid,
    compute_epsilon,
    config_hash,
    dbscan,
    default_config,
    enu_to_geodetic,
    evaluate,
    geodetic_to_enu,
    mad_filter,
    map_logs,
    match_landmarks,
    normalize_config,
    reference_point,
    render,
    simulate,
    simulate_and_map,
    so3_exp,
    so3_log,
    tangent_basis,
    version,
)

__version__ = version()


def config(overrides=None):
    """Full configuration as a dict, with `overrides` (nested dict) applied."""
    text = json.dumps(overrides or {})
    return json.loads(normalize_config(text))


__all__ = [
    "ConfigError",
    "DataError",
    "SolverError",
    "ablate",
    "cartesian_to_bearing_range",
    "centroid",
    "compute_epsilon",
    "config",
    "config_hash",
    "dbscan",
    "default_config",
    "enu_to_geodetic",
    "evaluate",
    "geodetic_to_enu",
    "mad_filter",
    "map_logs",
    "match_landmarks",
    "normalize_config",
    "reference_point",
    "render",
    "simulate",
    "simulate_and_map",
    "so3_exp",
    "so3_log",
    "tangent_basis",
    "version",
]
