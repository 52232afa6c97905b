"""Exception hierarchy shared by the stereo library and the CLI."""

from typing import Optional


class StereoError(Exception):
    """Base class for every error raised by the stereo package."""


class ShapeError(StereoError, ValueError):
    """Tensor shape does not satisfy an operation's contract."""

    def __init__(self, message: str, axis: Optional[str] = None):
        self.axis = axis
        if axis:
            message = f"{message} (axis: {axis})"
        super().__init__(message)


class ConfigurationError(StereoError, ValueError):
    """Invalid architecture, training or CLI configuration."""


class FormatError(StereoError):
    """Unsupported, truncated or corrupt file."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class ModelStateError(StereoError, RuntimeError):
    """A network was used in a state it cannot run in, e.g. inference before any training."""


class NoGroundTruthError(StereoError):
    """An error metric was requested over zero ground-truth pixels."""


class TargetRangeError(StereoError, ValueError):
    """A classification target lies outside [0, D] or on a masked disparity."""

    def __init__(self, message: str, pixel: Optional[int] = None):
        self.pixel = pixel
        if pixel is not None:
            message = f"{message} (pixel {pixel})"
        super().__init__(message)


class NumericalError(StereoError):
    """Training produced a non-finite loss or parameter."""

    def __init__(
        self,
        iteration: int,
        lr: float,
        batch_id: int,
        loss: float,
        parameter: Optional[str] = None,
    ):
        self.iteration = iteration
        self.lr = lr
        self.batch_id = batch_id
        self.loss = loss
        self.parameter = parameter
        what = f"non-finite parameter {parameter}" if parameter else f"non-finite loss {loss!r}"
        super().__init__(f"{what} at iteration {iteration} (lr={lr:g}, batch={batch_id})")
