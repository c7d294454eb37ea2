"""sage-agent: client SDK for the splatnav wire protocol (v1)."""

from .client import (
    EnvClient,
    Observation,
    ProtocolError,
    VersionError,
    connect,
    run_all,
    run_policy,
)
from .policies import always_stop, forward_only, random_policy

__version__ = "0.1.0"
