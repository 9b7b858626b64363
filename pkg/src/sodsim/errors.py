"""Exception hierarchy shared by every sodsim module."""


class SodSimError(Exception):
    pass


class RowIndexOverflow(SodSimError):
    pass


class MalformedCsc(SodSimError):
    pass


class CscFormatError(MalformedCsc):
    """Raised when a CSC file header is unreadable (bad magic, version)."""


class TileTooLarge(SodSimError):
    pass


class AccumulatorOverflow(SodSimError):
    pass


class Infeasible(SodSimError):
    pass


class ConfigError(SodSimError):
    """Config parse/validation failure. Carries file and line when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class UnknownModel(SodSimError):
    pass
