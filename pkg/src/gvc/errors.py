"""Exception hierarchy for the engine."""


class GvcError(Exception):
    """Base class for all engine errors."""


class TableFormatError(GvcError):
    """Input files are malformed: missing cells, duplicate keys, inconsistent codes."""


class NonProductive(GvcError):
    """Spectral radius of the coefficient matrix is not below one."""

    def __init__(self, rho, which="A"):
        super().__init__(f"spectral radius of {which} is {rho:.6g} >= 1; economy is not productive")
        self.rho = rho


class Singular(GvcError):
    """(I - A) could not be factorized."""


class UnknownCountry(GvcError, KeyError):
    def __init__(self, code):
        super().__init__(code)
        self.code = code

    def __str__(self):
        return f"unknown country code: {self.code!r}"


class BetaOutOfRange(GvcError, ValueError):
    """Bonacich attenuation is outside the convergent range."""


class NoConvergence(GvcError):
    def __init__(self, message, iterations):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class RankDeficient(GvcError):
    """Design matrix is rank deficient; ``columns`` names the offenders."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("rank-deficient design; collinear or constant columns: " + ", ".join(self.columns))


class EmptyAfterTransform(GvcError):
    """No observations remain after transforms and missing-value removal."""


class NonBinaryDependent(GvcError, ValueError):
    """Linear probability model requires a 0/1 dependent variable."""


class UnknownTemplate(GvcError, KeyError):
    def __str__(self):
        return f"unknown regression template: {self.args[0]!r}"
