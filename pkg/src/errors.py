"""
Exception hierarchy for the risk assessment pipeline.
"""
from typing import Optional


class PipelineError(Exception):
    """Base class for every error raised by the pipeline."""


class ValidationFailure(PipelineError):
    """Input or configuration failed validation (CLI exit code 1)."""


class ManifestError(ValidationFailure):
    """Malformed or inconsistent dataset manifest."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class SplitError(ValidationFailure):
    """Dataset cannot be split as requested."""


class ConfigError(ValidationFailure):
    """Experiment configuration is invalid."""


class ConfigMismatchError(ValidationFailure):
    """Existing experiment outputs were produced under a different config."""


class MissingArtifactError(PipelineError):
    """An upstream stage artifact does not exist (CLI exit code 2)."""

    def __init__(self, path: str, stage: Optional[str] = None):
        self.path = path
        self.stage = stage
        hint = f" (run stage '{stage}' first)" if stage else ""
        super().__init__(f"missing upstream artifact: {path}{hint}")


class ProviderError(PipelineError):
    """A transcription or extraction provider failed."""

    retryable = False


class ProviderUnavailableError(ProviderError):
    """Provider timed out, was rate limited or returned a server error."""

    retryable = True


class EmptyProviderOutputError(ProviderError):
    """Provider returned no text."""


class MissingTranscriptError(ProviderError):
    """File provider found no transcript next to the recording."""


class UnknownProviderError(ProviderError):
    """No provider is registered under the requested id."""


class PromptError(PipelineError):
    """Prompt template is missing or malformed."""


class ModalityError(PipelineError):
    """Input modality does not match the encoder or task."""


class DimensionError(PipelineError):
    """Vector or parameter shapes do not line up."""


class TrainingError(PipelineError):
    """Training cannot start or diverged."""


class VotingError(PipelineError):
    """Per-task logits cannot be aggregated."""


class MetricsError(PipelineError):
    """Predictions and labels cannot be scored."""


class EncoderUnavailableError(PipelineError):
    """Encoder backend (optional package or checkpoint) cannot be loaded."""


class AlignmentError(PipelineError):
    """Inputs to be combined refer to different subjects or tasks."""
