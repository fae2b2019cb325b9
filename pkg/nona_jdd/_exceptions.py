class NonaJddException(Exception):
    def __init__(self, message):
        self.message = message
        super().__init__(message)

    def __str__(self):
        return f"nona-jdd exception: {self.message}"


class ShapeMismatchError(NonaJddException):
    """Error when operand shapes do not satisfy an operation's contract."""

    def __init__(self, operation, detail):
        self.operation = operation
        message = f"{operation}: {detail}"
        super().__init__(message)


class GradientError(NonaJddException):
    """Error in the reverse pass (e.g. backward on a non-scalar output)."""

    def __init__(self, message):
        super().__init__(message)


class NonFiniteError(NonaJddException):
    """Error when a computation produced NaN or Inf."""

    def __init__(self, where):
        self.where = where
        message = f"non-finite values produced by {where}"
        super().__init__(message)


class NonFiniteLossError(NonFiniteError):
    """Error when one term of the training objective became NaN or Inf."""

    def __init__(self, term, step=None, op=None):
        self.term = term
        self.step = step
        self.op = op
        where = f"loss term '{term}'" + (f" at step {step}" if step is not None else "")
        if op is not None:
            where += f" ({op})"
        super().__init__(where)


class PatternNotSupportedError(NonaJddException):
    """Error when a CFA pattern kind or base is not supported by this library."""

    def __init__(self, kind):
        self.kind = kind
        message = f"CFA pattern ({kind}) not supported."
        super().__init__(message)


class VariantNotImplementedError(NonaJddException):
    """Error when an ablation variant name is not registered."""

    def __init__(self, variant):
        self.variant = variant
        message = f"Model variant ({variant}) not implemented."
        super().__init__(message)


class BatchNormStateError(NonaJddException):
    """Error when batch norm runs in eval mode without running statistics."""

    def __init__(self, layer):
        self.layer = layer
        message = f"batch norm '{layer}' has no running statistics for eval mode"
        super().__init__(message)


class ConfigError(NonaJddException):
    """Error in a run configuration document or command-line flags."""

    def __init__(self, message):
        super().__init__(message)


class DataError(NonaJddException):
    """Error in input data: images, mosaics, datasets or checkpoints."""

    def __init__(self, message):
        super().__init__(message)


class ImageDecodeError(DataError):
    """Error when an image file cannot be decoded."""

    def __init__(self, path, reason):
        self.path = path
        message = f"cannot decode image {path}: {reason}"
        super().__init__(message)


class EmptyDatasetError(DataError):
    """Error when a dataset directory yields nothing usable."""

    def __init__(self, location):
        self.location = location
        message = f"no usable images found in {location}"
        super().__init__(message)


class CheckpointError(DataError):
    """Error when a checkpoint file is corrupt, truncated or of another version."""

    def __init__(self, path, reason):
        self.path = path
        message = f"checkpoint {path}: {reason}"
        super().__init__(message)
