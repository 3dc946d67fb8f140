"""Exception hierarchy for the mnepv package."""


class MnepvError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(MnepvError, ValueError):
    """Operands have incompatible shapes."""


class NonHermitianError(MnepvError, ValueError):
    """Matrix deviates from Hermitian symmetry beyond tolerance."""


class MonotonicityError(MnepvError, ValueError):
    """A coefficient function has a negative derivative somewhere."""


class SingularProblemError(MnepvError, ArithmeticError):
    """H(x) vanished identically; the relative residual is undefined (infinite)."""


class SingularShiftError(MnepvError, ArithmeticError):
    """Shifted system is singular to working precision."""


class EigenConvergenceError(MnepvError, RuntimeError):
    """Iterative eigensolver did not converge; carries the best iterate found.

    Attributes:
        best_value: best Ritz value, or None.
        best_vector: corresponding Ritz vector, or None.
    """

    def __init__(self, msg, best_value=None, best_vector=None):
        super().__init__(msg)
        self.best_value = best_value
        self.best_vector = best_vector


class IterativeSolveError(MnepvError, RuntimeError):
    """Iterative linear solve did not reach the requested tolerance."""


class NoConvergenceError(MnepvError, RuntimeError):
    """No run of a multistart reached the residual tolerance."""


class DegenerateTensorError(MnepvError, ArithmeticError):
    """rho(x*) = 0: the z factor of the rank-one approximation is undefined.

    Attributes:
        f_star: objective value at the degenerate solution (typically 0).
    """

    def __init__(self, msg, f_star=0.0):
        super().__init__(msg)
        self.f_star = f_star


class InternalConsistencyError(MnepvError, RuntimeError):
    """A runtime self-check failed (e.g. a distance bound came out negative)."""


class ParseError(MnepvError, ValueError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, msg, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{loc} {msg}" if loc else msg)
        self.path = path
        self.line = line
