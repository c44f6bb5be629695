"""Exception types shared across the package."""


class TileCholError(Exception):
    """Base class for all tilechol errors."""


class MatrixFormatError(TileCholError):
    """Structural problem in a matrix file or in assembled matrix data."""


class NotPositiveDefiniteError(TileCholError):
    """Cholesky hit a non-positive pivot.

    ``index`` is the global scalar index of the offending diagonal entry in
    the domain being factorized (i.e. after any fill-reducing permutation);
    ``original_index`` is set by the top-level API when the permutation is
    known, mapping back to the caller's row numbering.
    """

    def __init__(self, index: int, original_index: int | None = None):
        self.index = index
        self.original_index = original_index
        msg = f"matrix is not positive definite at diagonal index {index}"
        if original_index is not None and original_index != index:
            msg += f" (original index {original_index})"
        super().__init__(msg)


class FactorizeManyError(TileCholError):
    """One or more factorizations in a batch failed.

    ``errors`` maps problem position to the exception raised; ``results``
    holds a FactorContext per successful problem and None per failed one.
    """

    def __init__(self, errors: dict, results: list):
        self.errors = errors
        self.results = results
        parts = ", ".join(f"#{i}: {e}" for i, e in sorted(errors.items()))
        super().__init__(f"{len(errors)} of {len(results)} factorizations failed ({parts})")
