"""Exception hierarchy shared by the library and the CLI."""


class DoubleChirpError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(DoubleChirpError, ValueError):
    """Invalid parameters, plans or experiment configuration."""


class DimensionError(DoubleChirpError, ValueError):
    """Array shapes or lengths that do not agree."""


class CapacityError(ConfigurationError):
    """More end devices requested than the preamble space supports."""

    def __init__(self, n_users, bound):
        super().__init__(
            f"cannot assign {n_users} end devices: at most M/2 - 1 = {bound} "
            "unique chirp distances exist")
        self.n_users = n_users
        self.bound = bound
