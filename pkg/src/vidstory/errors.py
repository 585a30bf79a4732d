"""Exception hierarchy.

Every error the engine raises derives from :class:`VidstoryError` and belongs to
one CLI exit category (see ``vidstory.cli.EXIT_CODES``).
"""

from __future__ import annotations


class VidstoryError(Exception):
    category = "internal"


class ConfigError(VidstoryError, ValueError):
    """Invalid configuration, flags or user input."""

    category = "config"


class ValidationError(ConfigError):
    """A domain invariant was violated by caller-supplied data."""


class IngestionError(ConfigError):
    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__(f"prompt is missing required fields: {', '.join(self.missing)}")


class NotDeterminedError(VidstoryError):
    """Asked for a best arm before any arm in the dimension was pulled."""


class TransportError(VidstoryError):
    category = "transport"

    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


class ServiceError(TransportError):
    """The remote service answered with a non-success status."""

    def __init__(self, status: int, body: str, attempts: int = 1):
        super().__init__(f"service returned HTTP {status}: {body[:200]}", attempts)
        self.status = status
        self.body = body


class SchemaError(VidstoryError, ValueError):
    """A judge or backend document violated its output contract."""

    category = "schema"

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ContractError(SchemaError):
    """A structurally valid report lacks what the caller needs from it."""


class StageError(VidstoryError):
    """A pipeline stage failed; ``scene_index`` is set for per-scene stages."""

    category = "transport"

    def __init__(self, stage: str, cause: Exception, scene_index: int | None = None):
        where = f" (scene {scene_index})" if scene_index is not None else ""
        super().__init__(f"stage {stage!r}{where} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.scene_index = scene_index
        if isinstance(cause, VidstoryError):
            self.category = cause.category


class AssemblyError(VidstoryError):
    category = "assembly"

    def __init__(self, message: str, returncode: int | None = None, stderr: str = ""):
        super().__init__(message)
        self.returncode = returncode
        self.stderr = stderr


class RefinementError(VidstoryError):
    """Generator or verifier failure inside a refinement loop.

    ``trace`` holds the attempts completed before the failure.
    """

    def __init__(self, cause: Exception, trace):
        super().__init__(f"refinement aborted after {len(trace.attempts)} attempt(s): {cause}")
        self.cause = cause
        self.trace = trace
        if isinstance(cause, VidstoryError):
            self.category = cause.category
