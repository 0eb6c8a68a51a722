"""Exception types shared across the package."""


class ClinqaError(Exception):
    """Base class for all errors raised by this package."""


class CaseFileError(ClinqaError):
    """A case or submission document could not be parsed."""


class ValidationError(ClinqaError):
    """A domain object violates one of its invariants."""


class RenderError(ClinqaError):
    """A prompt could not be rendered from the given inputs."""


class OutputParseError(ClinqaError):
    """No usable structure could be recovered from a model response."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class GatewayError(ClinqaError):
    """A backend failed to produce a response."""


class ScriptUnderrunError(GatewayError):
    """The scripted backend ran out of queued replies for a stage."""


class GatewayBatchError(GatewayError):
    """One or more requests in a batch failed."""

    def __init__(self, failures):
        self.failures = list(failures)
        indices = ", ".join(str(i) for i, _ in self.failures)
        super().__init__(f"batch failed at indices [{indices}]")


class PipelineError(ClinqaError):
    """A subtask pipeline could not produce a usable output for a case."""


class JudgeError(ClinqaError):
    """A judge call failed or returned an unusable score."""


class EvaluationError(ClinqaError):
    """Metric computation was asked for an impossible comparison."""
