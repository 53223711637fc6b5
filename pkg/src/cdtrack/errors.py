"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Operands have incompatible shapes or an empty extent."""


class NumericalConsistencyError(ArithmeticError):
    """A quantity that must vanish numerically exceeded its tolerance."""


class EmptySelectionError(ValueError):
    """A channel selection with no active channels was used where c >= 1 is required."""


class SingularSystemError(ValueError):
    """An unregularized per-bin system is singular.

    Carries the flat bin index and its (row, col) position in the spectrum.
    """

    def __init__(self, bin_index, position):
        self.bin_index = int(bin_index)
        self.position = tuple(int(v) for v in position)
        super().__init__(
            f"singular per-bin system at bin {self.bin_index} "
            f"(row {self.position[0]}, col {self.position[1]}); "
            "a positive regularizer is required for rank-deficient data"
        )
