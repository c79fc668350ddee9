"""HTTP autocomplete service: config, session store, API schemas, app."""
from .app import create_app, load_bundle
from .config import ENV_PREFIX, ServiceConfig, load_config
from .store import ACTIONS, SessionState, SessionStore

__all__ = [
    "ACTIONS",
    "ENV_PREFIX",
    "ServiceConfig",
    "SessionState",
    "SessionStore",
    "create_app",
    "load_bundle",
    "load_config",
]
