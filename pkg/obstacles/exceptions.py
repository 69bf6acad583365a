class ObstacleError(Exception):
    """Base class for every error raised by the detector."""


class ParameterError(ObstacleError, ValueError):
    """An operation received parameters outside its contract."""


class InvalidPolygonError(ParameterError):
    pass


class DegenerateInputError(ObstacleError):
    """Model fitting had too little or too degenerate data."""


class GroundNotFoundError(DegenerateInputError):
    pass


class ConfigError(ObstacleError):
    """Pipeline configuration failed validation.

    ``errors`` maps ``section.field`` to a list of messages.
    """

    def __init__(self, errors):
        self.errors = dict(errors)
        lines = [f"{key}: {'; '.join(messages)}" for key, messages in sorted(self.errors.items())]
        super().__init__("Invalid configuration:\n  " + "\n  ".join(lines))


class DatasetError(ObstacleError):
    pass


class FrameReadError(ObstacleError):
    def __init__(self, frame_id, message):
        self.frame_id = frame_id
        self.detail = message
        super().__init__(f"frame {frame_id:06d}: {message}")


class ResultsWriteError(ObstacleError):
    """Writing results failed; ``manifest`` lists the files written so far."""

    def __init__(self, message, manifest):
        self.manifest = list(manifest)
        super().__init__(message)


class SceneSpecError(ObstacleError):
    pass


class EvaluationError(ObstacleError):
    pass
