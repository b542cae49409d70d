"""Exception hierarchy shared by every module of the package."""


class SotddError(Exception):
    """Base class for all errors raised by this package."""


class DatasetError(SotddError, ValueError):
    pass


class EmptyDataset(DatasetError):
    pass


class LengthMismatch(SotddError, ValueError):
    pass


class NonFiniteFeature(DatasetError):
    def __init__(self, row, column):
        self.row = int(row)
        self.column = int(column)
        super().__init__(f"non-finite feature value at row {self.row}, column {self.column}")


class DimensionMismatch(SotddError, ValueError):
    pass


class ShapeMismatch(SotddError, ValueError):
    pass


class InvalidDimension(SotddError, ValueError):
    pass


class InvalidRate(SotddError, ValueError):
    pass


class InvalidOrder(SotddError, ValueError):
    pass


class MassMismatch(SotddError, ValueError):
    pass


class MomentOverflow(SotddError, ArithmeticError):
    """A scaled moment left the finite range of 64-bit floats.

    ``projection``, ``label`` and ``order`` are filled in when known.
    """

    def __init__(self, message="scaled moment is not finite", projection=None, label=None, order=None):
        self.projection = projection
        self.label = label
        self.order = order
        parts = [message]
        if projection is not None:
            parts.append(f"projection={projection}")
        if label is not None:
            parts.append(f"class={label}")
        if order is not None:
            parts.append(f"lambda={order}")
        super().__init__(", ".join(parts))


class FingerprintMismatch(SotddError, ValueError):
    pass


class ScaleExceeded(SotddError, ValueError):
    pass


class InfeasibleMarginals(SotddError, ValueError):
    pass


class EigenFailure(SotddError, ArithmeticError):
    pass


class DegenerateSeries(SotddError, ValueError):
    pass


class NonPositiveInput(SotddError, ValueError):
    pass


class FormatError(SotddError, ValueError):
    """Base class for file-format problems."""


class ParseError(FormatError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class RaggedRows(FormatError):
    pass


class MissingLabelColumn(FormatError):
    pass


class BadMagic(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class VersionUnsupported(FormatError):
    pass


class CountMismatch(FormatError):
    pass
