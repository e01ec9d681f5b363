"""Exception hierarchy shared by the library and the command line."""


class InputError(ValueError):
    """Malformed or inconsistent input data (CLI exit code 1)."""


class ComputationError(RuntimeError):
    """A numerical step could not produce a valid result (CLI exit code 2)."""


class DegeneratePortfolioError(ComputationError):
    pass
