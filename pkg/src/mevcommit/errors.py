"""Exception types shared across the package."""


class MevCommitError(Exception):
    """Base class for all package errors."""


class GameStructureError(MevCommitError, ValueError):
    pass


class ProfileError(MevCommitError, ValueError):
    """A strategy profile is malformed or misses a reached information set."""


class GridError(MevCommitError, ValueError):
    """Popsicle parameters or values that are off the configured grids."""


class BudgetExceeded(MevCommitError):
    """An enumeration would exceed its configured size budget.

    ``what`` names the offending quantity and ``size`` its (possibly huge)
    exact value so callers can report it.
    """

    def __init__(self, what: str, size: int, limit: int):
        self.what = what
        self.size = size
        self.limit = limit
        shown = str(size) if size < 10**12 else f"~10^{len(str(size)) - 1}"
        super().__init__(f"{what}: {shown} exceeds budget {limit}")


class CutError(MevCommitError, ValueError):
    pass


class ContractSyntaxError(MevCommitError, ValueError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


class ContractTypeError(MevCommitError, ValueError):
    pass


class ContractCompileError(MevCommitError, ValueError):
    pass
