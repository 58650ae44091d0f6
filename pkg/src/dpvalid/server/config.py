"""Server configuration from a single JSON file.

No environment-variable fallbacks: what the file says is what runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import MalformedRequestError


@dataclass(frozen=True)
class ServerConfig:
    storage_dir: str
    host: str = "127.0.0.1"
    port: int = 8470
    api_token: str | None = None
    default_min_subset_size: int = 1
    seed: int | None = None  # fixed RNG seed for tests; None = fresh entropy

    def __post_init__(self):
        if self.default_min_subset_size < 1:
            raise MalformedRequestError("default_min_subset_size must be at least 1")
        if not self.storage_dir:
            raise MalformedRequestError("storage_dir is required")

    @staticmethod
    def from_json(doc: dict) -> "ServerConfig":
        known = {"storage_dir", "host", "port", "api_token",
                 "default_min_subset_size", "seed"}
        unknown = set(doc) - known
        if unknown:
            raise MalformedRequestError(f"unknown server config keys: {sorted(unknown)}")
        if "storage_dir" not in doc:
            raise MalformedRequestError("server config needs storage_dir")
        return ServerConfig(
            storage_dir=str(doc["storage_dir"]),
            host=str(doc.get("host", "127.0.0.1")),
            port=int(doc.get("port", 8470)),
            api_token=doc.get("api_token"),
            default_min_subset_size=int(doc.get("default_min_subset_size", 1)),
            seed=doc.get("seed"),
        )

    @staticmethod
    def from_file(path: str | Path) -> "ServerConfig":
        return ServerConfig.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
