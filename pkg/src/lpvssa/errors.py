"""Exception types.

Two families matter to callers: :class:`InputError` (malformed files, bad
shapes, invalid words) and :class:`NumericalError` (rank deficiency,
indefinite covariances, divergence). The command line maps them to exit
codes 2 and 1 respectively.
"""


class LpvError(Exception):
    """Base class for all package errors."""


class InputError(LpvError):
    """Invalid user input: malformed files, bad shapes, invalid words."""


class ShapeError(InputError, ValueError):
    pass


class ValidationError(InputError, ValueError):
    pass


class ParseError(InputError, ValueError):
    """A model, dataset or selection file could not be parsed.

    ``location`` names the offending field or line when known.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class MissingWordError(InputError, KeyError):
    """A matrix series was queried at a word it does not contain."""

    def __init__(self, word):
        from .words import format_word

        self.word = tuple(word)
        super().__init__(f"no value stored for word {format_word(self.word)!r}")

    def __str__(self):
        return self.args[0]


class NumericalError(LpvError):
    """An algorithmic step failed for numerical reasons."""


class RealizationError(NumericalError):
    """The Hankel matrix is rank deficient or too ill-conditioned to invert.

    ``sv_ratio`` is sigma_min / sigma_max of the offending matrix.
    """

    def __init__(self, message, sv_ratio=None, singular_values=None):
        self.sv_ratio = sv_ratio
        self.singular_values = singular_values
        super().__init__(message)


class RankDeficiencyError(RealizationError):
    """No selection of the requested rank exists; ``best_rank`` is what was reached."""

    def __init__(self, message, best_rank=None, **kwargs):
        self.best_rank = best_rank
        super().__init__(message, **kwargs)


class IndefiniteError(NumericalError):
    """An innovation variance iterate lost positive definiteness."""

    def __init__(self, sigma, iteration, eigenvalue):
        self.sigma = sigma
        self.iteration = iteration
        self.eigenvalue = eigenvalue
        super().__init__(
            f"innovation variance for sigma={sigma} is not positive definite at "
            f"iteration {iteration} (min eigenvalue {eigenvalue:.3e})"
        )


class LyapunovError(NumericalError):
    """The stationary covariance equation has no unique solution."""


class DivergenceError(NumericalError):
    """A state recursion left the finite range."""

    def __init__(self, step, limit):
        self.step = step
        self.limit = limit
        super().__init__(f"state norm exceeded {limit:.1e} at sample {step}")


class IdentificationError(NumericalError):
    """A stage of the identification pipeline failed.

    ``stage`` names the failing step and ``partial`` holds whatever was
    computed before the failure (diagnostics, the deterministic realization).
    """

    def __init__(self, stage, cause, partial=None):
        self.stage = stage
        self.cause = cause
        self.partial = partial if partial is not None else {}
        super().__init__(f"stage '{stage}' failed: {cause}")
