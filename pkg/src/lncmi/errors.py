"""Exception types raised across the package."""


class LncmiError(Exception):
    """Base class for all errors raised by lncmi."""


class DataError(LncmiError):
    """Input data cannot be used as given."""


class ParseError(DataError, ValueError):
    """A CSV cell or header could not be parsed.

    ``row`` is the 1-based data row (header excluded), ``column`` the header
    name; either may be None when the problem is not cell-specific.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)


class InsufficientSamples(DataError):
    def __init__(self, effective, required):
        self.effective = effective
        self.required = required
        super().__init__(
            f"only {effective} complete rows, at least {required} required"
        )


class ZeroDistance(DataError):
    """The k-th neighbor coincides with the query point."""

    def __init__(self, index, k):
        self.index = index
        self.k = k
        super().__init__(
            f"point {index} has a duplicate within its {k} nearest neighbors; "
            "enable jitter (deduplicate_jitter / --jitter) or remove duplicate rows"
        )


class DimensionTooSmall(DataError):
    def __init__(self, d, required=2):
        self.d = d
        super().__init__(f"mutual information needs d >= {required}, got d={d}")


class DegenerateAxis(DataError):
    """All k neighbors share coordinate ``axis`` with the center point."""

    def __init__(self, axis, index=None):
        self.axis = axis
        self.index = index
        where = "" if index is None else f" at point {index}"
        super().__init__(
            f"zero-width neighbor rectangle along axis {axis}{where}; "
            "the column has repeated values, enable jitter"
        )


class AlphaUnavailable(LncmiError, KeyError):
    def __init__(self, k, d):
        self.k = k
        self.d = d
        super().__init__(k, d)

    def __str__(self):
        return (
            f"no calibrated alpha for k={self.k}, d={self.d}; pass --alpha, "
            f"point --alpha-table at a table containing it, or run "
            f"`lncmi calibrate --k {self.k} --d {self.d}`"
        )


class TruthUnavailable(LncmiError):
    pass


class TableVersionMismatch(DataError):
    pass
