"""Python bindings for the switchcert C++ core."""

from ._switchcert import (
    Bundle,
    Config,
    ConfigError,
    NumericError,
    ProtocolError,
    ResourceError,
    TransportError,
    ValidationError,
    content_hash,
    contraction_factor,
    cover,
    dwell_time_min,
    initial_bundle,
    iss_decay_rate,
    iss_gain,
    load_bundle,
    load_config,
    parse_config,
    simulate,
    train_all,
    verify,
)

__all__ = [name for name in dir() if not name.startswith("_")]
