"""Backend config file.

YAML or JSON mapping capability name to endpoint settings::

    text:
      endpoint: https://llm.example/v1/generate
      model: some-model
      timeout_s: 120
      retries: 3
      max_in_flight: 4
      api_key_env: VIDSTORY_TEXT_KEY   # secret read from the environment
    image: {...}
    video: {...}
    speech: {...}
    music: {...}
    judge: {...}

Credentials never live in the file; only the environment variable name does.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from ..errors import ConfigError
from .base import Backends, Capability
from .http import EndpointConfig, HttpBackend

_FIELDS = set(EndpointConfig.__dataclass_fields__)


def load_endpoint_configs(source: str | Path | dict) -> dict[Capability, EndpointConfig]:
    data = source if isinstance(source, dict) else yaml.safe_load(Path(source).read_text())
    if not isinstance(data, dict):
        raise ConfigError("backend config must be a mapping of capability -> settings")
    data = data.get("backends", data)
    out = {}
    for name, settings in data.items():
        try:
            cap = Capability[name.capitalize()]
        except KeyError:
            raise ConfigError(f"unknown capability {name!r}") from None
        if not isinstance(settings, dict) or "endpoint" not in settings:
            raise ConfigError(f"capability {name!r} needs an 'endpoint'")
        unknown = set(settings) - _FIELDS
        if unknown:
            raise ConfigError(f"capability {name!r}: unknown settings {sorted(unknown)}")
        if any(k in settings for k in ("api_key", "token", "secret")):
            raise ConfigError("credentials must come from environment variables")
        out[cap] = EndpointConfig(**settings)
    missing = [c.value for c in Capability if c not in out]
    if missing:
        raise ConfigError(f"backend config lacks capabilities: {', '.join(missing)}")
    return out


def http_backends(source: str | Path | dict) -> Backends:
    return Backends.uniform(HttpBackend(load_endpoint_configs(source)))
