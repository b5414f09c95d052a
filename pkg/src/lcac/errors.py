"""Exception hierarchy. Every error is a ``ValueError`` so callers that only
care about bad input can catch the builtin."""


class LcacError(ValueError):
    pass


class InvalidInputError(LcacError):
    pass


class InvalidConfigError(LcacError):
    pass


class InsufficientDataError(LcacError):
    pass


class InvalidProfileError(LcacError):
    pass


class MissingProfileError(LcacError):
    pass


class ExtrapolationRangeError(LcacError):
    pass
