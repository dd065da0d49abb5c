"""Exception types shared across the toolkit."""


class ParseError(ValueError):
    """A serialized artifact (edge list, schedule) is malformed."""


class CapacityError(ValueError):
    """An exact computation would exceed its enumeration/size guard."""


class DegenerateGroupError(RuntimeError):
    """A difference-in-means group is empty; the estimator is undefined
    for this draw."""


class ConfigError(ValueError):
    """An experiment configuration is invalid."""
