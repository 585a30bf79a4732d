from __future__ import annotations

import enum
import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Protocol, TypeVar

from ..errors import SchemaError, ValidationError

log = logging.getLogger(__name__)

T = TypeVar("T")

FORMAT_REMINDER = (
    "\n\nYour previous answer could not be parsed ({error}). Reply with a single JSON object "
    "exactly matching the requested schema, with no prose and no code fences."
)


class Capability(enum.Enum):
    Text = "Text"
    Image = "Image"
    Video = "Video"
    Speech = "Speech"
    Music = "Music"
    Judge = "Judge"


@dataclass(frozen=True)
class Attachment:
    """A blob handed to a backend: its content-addressed ref plus the bytes."""

    ref: str
    data: bytes
    media_type: str = "application/octet-stream"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.data).hexdigest()


@dataclass(frozen=True)
class CapabilityRequest:
    capability: Capability
    prompt: str
    attachments: tuple[Attachment, ...] = ()
    params: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.capability in (Capability.Text, Capability.Judge) and not self.prompt.strip():
            raise ValidationError(f"{self.capability.value} request needs a non-empty prompt")
        object.__setattr__(self, "attachments", tuple(self.attachments))
        for k, v in self.params.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise ValidationError("request params must map strings to strings")

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.capability.value.encode())
        h.update(b"\0")
        h.update(self.prompt.encode())
        for a in self.attachments:
            h.update(b"\0")
            h.update(a.digest.encode())
        h.update(b"\0")
        h.update(json.dumps(self.params, sort_keys=True).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class BackendResponse:
    text: str = ""
    blob: bytes | None = None
    name: str | None = None
    media_type: str = "text/plain"


class Backend(Protocol):
    def invoke(self, request: CapabilityRequest) -> BackendResponse: ...


@dataclass
class Backends:
    """One backend per capability; any may be the same object."""

    text: Backend
    image: Backend
    video: Backend
    speech: Backend
    music: Backend
    judge: Backend

    @classmethod
    def uniform(cls, backend: Backend) -> Backends:
        return cls(backend, backend, backend, backend, backend, backend)


def invoke_structured(backend: Backend, request: CapabilityRequest, parse: Callable[[str], T]) -> T:
    """Invoke and parse; on a schema failure re-ask exactly once with a format reminder."""
    response = backend.invoke(request)
    try:
        return parse(response.text)
    except SchemaError as first:
        log.warning("unparseable %s output (%s); re-asking once", request.params.get("task", "?"), first)
        retry = CapabilityRequest(
            request.capability,
            request.prompt + FORMAT_REMINDER.format(error=first),
            request.attachments,
            {**request.params, "reask": "1"},
        )
        return parse(backend.invoke(retry).text)
