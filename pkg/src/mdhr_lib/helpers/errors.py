class MdhrError(Exception):
    """A generic library error. Specific errors will subclass this."""
    pass


class DimensionError(MdhrError, ValueError):
    """Tensor shapes, channels or broadcast patterns don't line up."""
    pass


class DomainError(MdhrError, ValueError):
    """A value lies outside the domain of an operation."""
    pass


class UsageError(MdhrError):
    """An API was called in a way it doesn't support."""
    pass


class ConfigError(MdhrError):
    """A configuration value is invalid. ``field`` names the offending key."""

    def __init__(self, field, message):
        super(ConfigError, self).__init__("{}: {}".format(field, message))
        self.field = field


class FormatError(MdhrError):
    """A file on disk is malformed.

    Args:
        path (str): the file being read.
        offset (int): byte offset at which parsing failed.
    """

    def __init__(self, path, offset, message):
        super(FormatError, self).__init__(
            "{} (byte {}): {}".format(path, offset, message))
        self.path = path
        self.offset = offset


class CheckpointError(MdhrError):
    """A checkpoint doesn't match the configuration it is loaded into."""
    pass


class NonFiniteError(MdhrError):
    """A NaN or infinite value showed up in a gradient or a loss."""

    def __init__(self, name, message=None):
        super(NonFiniteError, self).__init__(
            message or "non-finite values in {}".format(name))
        self.name = name


class TrainingAborted(MdhrError):
    """Training stopped early; the last good checkpoint is kept at ``checkpoint``."""

    def __init__(self, reason, checkpoint):
        super(TrainingAborted, self).__init__(
            "{} (last good checkpoint: {})".format(reason, checkpoint))
        self.reason = reason
        self.checkpoint = checkpoint
