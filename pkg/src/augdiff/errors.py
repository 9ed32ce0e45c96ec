"""Exception hierarchy shared across the pipeline.

The CLI maps these onto distinct exit codes: config 2, data 3,
generation 4, training 5. Anything else exits 1.
"""


class PipelineError(Exception):
    exit_code = 1


class ConfigError(PipelineError):
    exit_code = 2


class DataError(PipelineError):
    exit_code = 3


class ManifestError(DataError):
    """A manifest failed to parse or violated a dataset invariant."""

    def __init__(self, message, record=None):
        if record is not None:
            message = f"record {record}: {message}"
        super().__init__(message)
        self.record = record


class GenerationError(PipelineError):
    exit_code = 4

    def __init__(self, message, retriable=False, request_key=None):
        if request_key is not None:
            message = f"{message} (request key {request_key})"
        super().__init__(message)
        self.retriable = retriable
        self.request_key = request_key


class TrainingError(PipelineError):
    exit_code = 5


class UntrainedModelError(TrainingError):
    """A model was used for inference before being trained."""
