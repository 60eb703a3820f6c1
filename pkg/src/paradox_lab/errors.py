"""Exception hierarchy shared by all modules."""


class ParadoxLabError(Exception):
    """Base class for every error raised by this package."""


class TruncationError(ParadoxLabError, ValueError):
    """A requested state does not fit inside the Fock truncation."""


class SectorError(ParadoxLabError, ValueError):
    """An occupation tuple lies outside the declared boson-number sector."""


class ProjectorError(ParadoxLabError, ValueError):
    """Projectors (or an allowed-state set) are not orthonormal."""


class ModeIndexError(ParadoxLabError, IndexError):
    pass


class ModeError(ParadoxLabError, ValueError):
    """Operation requires a different number of modes."""


class KindError(ParadoxLabError, TypeError):
    """Operator kind does not satisfy the operation's precondition."""


class CalibrationError(ParadoxLabError, RuntimeError):
    """The Josephson parameters are outside the nonlinear beam-splitter regime."""


class VariantError(ParadoxLabError, ValueError):
    pass


class BasisError(ParadoxLabError, ValueError):
    pass


class ArgumentError(ParadoxLabError, ValueError):
    pass


class GridError(ParadoxLabError, ValueError):
    pass


class TableError(ParadoxLabError, KeyError):
    """A probability table lacks an entry required by a statistic."""

    def __str__(self) -> str:  # KeyError repr-quotes its message otherwise
        return str(self.args[0]) if self.args else ""
