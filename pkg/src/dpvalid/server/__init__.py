"""Budget-enforcing JSON-over-HTTP query service."""

from .app import build_app
from .config import ServerConfig
from .service import DatasetRegistration, ValidationService

__all__ = [
    "DatasetRegistration",
    "ServerConfig",
    "ValidationService",
    "build_app",
]
