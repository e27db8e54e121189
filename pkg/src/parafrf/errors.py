"""Exception hierarchy shared by all pipeline stages."""


class ParafrfError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(ParafrfError, ValueError):
    """An input violates a documented precondition."""


class NumericalInconsistencyError(ParafrfError):
    """A numerical self-check failed (e.g. complex residue after an inverse FFT)."""


class DegenerateExcitationError(ParafrfError):
    """The force auto-spectrum vanishes at some frequency bin."""

    def __init__(self, bin_index, freq_hz):
        self.bin_index = int(bin_index)
        self.freq_hz = float(freq_hz)
        super().__init__(
            f"force auto-spectrum is zero at bin {self.bin_index} ({self.freq_hz:g} Hz)")


class RankDeficiencyError(ParafrfError):
    """A least-squares system lost rank during an iterative fit."""

    def __init__(self, iteration, rank, n_columns):
        self.iteration = iteration
        self.rank = rank
        self.n_columns = n_columns
        super().__init__(
            f"rank-deficient LS system at iteration {iteration} "
            f"(rank {rank} < {n_columns} unknowns)")


class EigenConditionError(ParafrfError):
    """Pole relocation produced an (almost) defective eigenproblem."""

    def __init__(self, condition):
        self.condition = float(condition)
        super().__init__(f"eigenvector matrix condition number {self.condition:.3e}")


class PoleCollisionError(ParafrfError):
    """A model was evaluated on top of one of its poles."""


class DivisionSingularityError(ParafrfError):
    """Frequency-domain inversion hit a zero of the model without regularization."""

    def __init__(self, freq_hz):
        self.freq_hz = float(freq_hz)
        super().__init__(f"model magnitude is zero at {self.freq_hz:g} Hz")


class DegenerateReferenceError(ParafrfError):
    """The reference signal of a relative error is identically zero."""


class OrderExhaustedError(ParafrfError):
    """No least-squares samples remain for the parametric fit."""


class OutOfRangeError(ParafrfError, ValueError):
    """A parameter query lies outside the model's extrapolation guard."""


class AmbiguousNullspaceWarning(UserWarning):
    """All singular values of a Loewner matrix vanish; the null vector is not unique."""
