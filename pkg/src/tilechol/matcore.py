"""Symmetric sparse matrices (lower triangle, CSC), Matrix Market I/O,
arrowhead test-matrix generation and structure analysis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MatrixFormatError


@dataclass(eq=False)
class SymmetricCsc:
    """Symmetric sparse matrix storing only the lower triangle.

    Compressed-column layout: column j holds entries at positions
    col_ptr[j]:col_ptr[j+1] of row_idx/values, with row indices strictly
    increasing and row >= col. Every diagonal entry is present and positive.
    Instances are treated as immutable after construction.
    """

    n: int
    col_ptr: np.ndarray  # int64, length n + 1
    row_idx: np.ndarray  # int32
    values: np.ndarray   # float64

    @property
    def nnz(self) -> int:
        """Stored (lower-triangle) entry count."""
        return int(self.col_ptr[-1])

    @property
    def nnz_full(self) -> int:
        """Entry count of the full symmetric pattern."""
        return 2 * self.nnz - self.n

    @property
    def density_percent(self) -> float:
        return 100.0 * self.nnz_full / (self.n * self.n)

    def diagonal(self) -> np.ndarray:
        # the diagonal is always the first stored entry of its column
        return self.values[self.col_ptr[:-1]]

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
        return self.row_idx[lo:hi], self.values[lo:hi]

    def validate(self) -> None:
        """Raise ValueError if any storage invariant is violated."""
        n, cp, ri = self.n, self.col_ptr, self.row_idx
        if n < 1:
            raise ValueError("matrix order must be >= 1")
        if cp.shape != (n + 1,) or cp[0] != 0 or cp[-1] != len(ri) or len(ri) != len(self.values):
            raise ValueError("inconsistent CSC arrays")
        if np.any(np.diff(cp) < 1):
            raise ValueError("col_ptr must be nondecreasing with nonempty columns")
        for j in range(n):
            rows = ri[cp[j]:cp[j + 1]]
            if rows[0] != j:
                raise ValueError(f"column {j} missing its diagonal entry")
            if np.any(np.diff(rows) <= 0):
                raise ValueError(f"row indices not strictly increasing in column {j}")
            if rows[-1] >= n:
                raise ValueError(f"row index out of range in column {j}")
        if np.any(self.values[cp[:-1]] <= 0):
            raise ValueError("non-positive diagonal entry")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymmetricCsc):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.col_ptr, other.col_ptr)
                and np.array_equal(self.row_idx, other.row_idx)
                and np.array_equal(self.values, other.values))

    def to_dense(self) -> np.ndarray:
        """Full symmetric dense copy (intended for tests and small oracles)."""
        if self.n > 20000:
            raise ValueError("refusing to densify a matrix this large")
        a = np.zeros((self.n, self.n))
        cols = np.repeat(np.arange(self.n), np.diff(self.col_ptr))
        a[self.row_idx, cols] = self.values
        a[cols, self.row_idx] = self.values
        return a


def from_coordinates(n: int, rows, cols, vals, sum_duplicates: bool = True) -> SymmetricCsc:
    """Assemble a SymmetricCsc from coordinate data.

    Entries may address either triangle; each is mirrored into the lower one.
    Duplicates are summed when requested, otherwise rejected.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.size != cols.size or rows.size != vals.size:
        raise ValueError("coordinate arrays must have equal length")
    if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
        raise MatrixFormatError("coordinate index out of range")
    lo_r = np.maximum(rows, cols)
    lo_c = np.minimum(rows, cols)
    order = np.lexsort((lo_r, lo_c))
    lo_r, lo_c, vals = lo_r[order], lo_c[order], vals[order]
    if lo_r.size:
        keep = np.empty(lo_r.size, dtype=bool)
        keep[0] = True
        np.logical_or(lo_r[1:] != lo_r[:-1], lo_c[1:] != lo_c[:-1], out=keep[1:])
        if not keep.all():
            if not sum_duplicates:
                raise MatrixFormatError("duplicate entries present")
            starts = np.flatnonzero(keep)
            vals = np.add.reduceat(vals, starts)
            lo_r, lo_c = lo_r[keep], lo_c[keep]
    col_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(col_ptr, lo_c + 1, 1)
    np.cumsum(col_ptr, out=col_ptr)
    m = SymmetricCsc(n, col_ptr, lo_r.astype(np.int32), vals)
    # structural checks shared with the Matrix Market reader
    counts = np.diff(col_ptr)
    if np.any(counts < 1):
        j = int(np.argmin(counts))
        raise MatrixFormatError(f"missing diagonal entry in column {j + 1}")
    first = lo_r[col_ptr[:-1]] if lo_r.size else np.empty(0)
    if np.any(first != np.arange(n)):
        j = int(np.argmax(first != np.arange(n)))
        raise MatrixFormatError(f"missing diagonal entry in column {j + 1}")
    diag = vals[col_ptr[:-1]]
    if np.any(diag <= 0):
        j = int(np.argmax(diag <= 0))
        raise MatrixFormatError(f"non-positive diagonal entry in column {j + 1}")
    return m


def read_matrix_market(stream) -> SymmetricCsc:
    """Parse a coordinate-format symmetric real Matrix Market stream.

    Upper-triangle entries are mirrored into the lower triangle and
    duplicates are summed. Raises MatrixFormatError on malformed headers,
    non-symmetric declarations, or a missing/non-positive diagonal.
    """
    lines = iter(stream)
    try:
        header = next(lines)
    except StopIteration:
        raise MatrixFormatError("empty stream") from None
    tok = header.strip().split()
    if len(tok) != 5 or tok[0] != "%%MatrixMarket" or tok[1].lower() != "matrix":
        raise MatrixFormatError(f"malformed Matrix Market header: {header.strip()!r}")
    fmt, field, sym = tok[2].lower(), tok[3].lower(), tok[4].lower()
    if fmt != "coordinate":
        raise MatrixFormatError(f"unsupported format {fmt!r} (coordinate required)")
    if field not in ("real", "integer"):
        raise MatrixFormatError(f"unsupported field {field!r} (real required)")
    if sym != "symmetric":
        raise MatrixFormatError(f"matrix must be declared symmetric, got {sym!r}")

    size_line = None
    for line in lines:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        size_line = s
        break
    if size_line is None:
        raise MatrixFormatError("missing size line")
    parts = size_line.split()
    if len(parts) != 3:
        raise MatrixFormatError(f"malformed size line: {size_line!r}")
    nrows, ncols, nent = (int(p) for p in parts)
    if nrows != ncols:
        raise MatrixFormatError(f"matrix must be square, got {nrows}x{ncols}")
    if nrows < 1:
        raise MatrixFormatError("matrix order must be >= 1")

    ii = np.empty(nent, dtype=np.int64)
    jj = np.empty(nent, dtype=np.int64)
    vv = np.empty(nent, dtype=np.float64)
    k = 0
    for line in lines:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        if k >= nent:
            raise MatrixFormatError("more entries than declared")
        p = s.split()
        if len(p) != 3:
            raise MatrixFormatError(f"malformed entry line: {s!r}")
        try:
            ii[k] = int(p[0]) - 1
            jj[k] = int(p[1]) - 1
            vv[k] = float(p[2])
        except ValueError:
            raise MatrixFormatError(f"malformed entry line: {s!r}") from None
        k += 1
    if k != nent:
        raise MatrixFormatError(f"expected {nent} entries, found {k}")
    return from_coordinates(nrows, ii, jj, vv)


def write_matrix_market(m: SymmetricCsc, stream) -> None:
    """Write the lower triangle in coordinate format, 1-based indices.

    Values are printed with enough digits to round-trip exactly through
    read_matrix_market.
    """
    stream.write("%%MatrixMarket matrix coordinate real symmetric\n")
    stream.write(f"{m.n} {m.n} {m.nnz}\n")
    cols = np.repeat(np.arange(m.n), np.diff(m.col_ptr))
    for i, j, v in zip(m.row_idx, cols, m.values):
        stream.write(f"{i + 1} {j + 1} {v!r}\n")


def load_matrix_market(path) -> SymmetricCsc:
    with open(path, "r") as f:
        return read_matrix_market(f)


def save_matrix_market(m: SymmetricCsc, path) -> None:
    with open(path, "w") as f:
        write_matrix_market(m, f)


@dataclass(frozen=True)
class ArrowheadSpec:
    """Parameters of a generated arrowhead test matrix.

    n: order; b: half-bandwidth of the leading block; t: thickness of the
    dense trailing block ("the arrowhead"); block_diagonal: replace the band
    with disjoint dense b x b diagonal blocks; seed: value RNG seed.
    """

    n: int
    b: int
    t: int
    block_diagonal: bool = False
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.t < self.n):
            raise ValueError(f"need 0 <= t < n, got t={self.t}, n={self.n}")
        if not (0 <= self.b < self.n - self.t):
            raise ValueError(f"need 0 <= b < n - t, got b={self.b}, n-t={self.n - self.t}")
        if self.block_diagonal and self.b < 1:
            raise ValueError("block_diagonal needs b >= 1")


def pattern_nnz_lower(spec: ArrowheadSpec) -> int:
    """Stored lower-triangle entry count of the generated pattern (closed form)."""
    n, b, t = spec.n, spec.b, spec.t
    nh = n - t
    if spec.block_diagonal:
        nblocks, rem = divmod(nh, b)
        band = nblocks * (b * (b - 1) // 2) + rem * (rem - 1) // 2
    else:
        c = min(b, nh - 1)
        band = (nh - c) * c + c * (c - 1) // 2
    arrow = (n - 1 + nh) * t // 2  # sum of i over the t trailing rows
    return n + band + arrow


def pattern_density_percent(spec: ArrowheadSpec) -> float:
    """Density of the full symmetric pattern, in percent."""
    full = 2 * pattern_nnz_lower(spec) - spec.n
    return 100.0 * full / (spec.n * spec.n)


def generate_arrowhead(spec: ArrowheadSpec) -> SymmetricCsc:
    """Generate a deterministic SPD matrix with the requested arrowhead shape.

    Off-diagonal values are drawn uniformly from [-1, 1]; each diagonal entry
    is set to 1 plus the absolute sum of its full row, which makes the matrix
    strictly diagonally dominant and hence positive definite.
    """
    n, b, t = spec.n, spec.b, spec.t
    nh = n - t
    cols64 = np.arange(nh, dtype=np.int64)
    if spec.block_diagonal:
        block_end = np.minimum((cols64 // b + 1) * b, nh)
        band_len = block_end - cols64 - 1
    else:
        band_len = np.minimum(b, nh - 1 - cols64)
    head_len = 1 + band_len + t            # diag + band rows + arrow rows
    tail_cols = np.arange(nh, n, dtype=np.int64)
    tail_len = n - tail_cols               # diag .. last row, all dense
    col_ptr = np.zeros(n + 1, dtype=np.int64)
    col_ptr[1:nh + 1] = head_len
    col_ptr[nh + 1:] = tail_len
    np.cumsum(col_ptr, out=col_ptr)
    nnz = int(col_ptr[-1])
    assert nnz == pattern_nnz_lower(spec)

    # offset of each entry within its column, vectorized grouped arange
    lens = np.diff(col_ptr)
    offs = np.arange(nnz, dtype=np.int64) - np.repeat(col_ptr[:-1], lens)
    colof = np.repeat(np.arange(n, dtype=np.int64), lens)
    # head columns hold [j, j+1 .. j+band_len[j], nh .. n-1]; tail columns [j .. n-1]
    bl = np.zeros(n, dtype=np.int64)
    bl[:nh] = band_len
    blc = bl[colof]
    row = colof + offs  # right for the diagonal, the band and all tail columns
    arrow = (colof < nh) & (offs > blc)
    row[arrow] = nh + offs[arrow] - 1 - blc[arrow]
    row_idx = row.astype(np.int32)

    rng = np.random.default_rng(spec.seed)
    values = rng.uniform(-1.0, 1.0, size=nnz)
    diag_pos = col_ptr[:-1]
    offdiag = np.ones(nnz, dtype=bool)
    offdiag[diag_pos] = False
    # diagonal dominance over the full symmetric row
    absv = np.abs(values) * offdiag
    row_sum = np.bincount(row_idx, weights=absv, minlength=n)
    row_sum += np.bincount(colof, weights=absv, minlength=n)
    values[diag_pos] = row_sum + 1.0
    return SymmetricCsc(n, col_ptr, row_idx, values)


@dataclass(frozen=True)
class StructureStats:
    """Detected arrowhead structure of a matrix."""

    bandwidth: int
    thickness: int
    density_percent: float


def structure_stats(m: SymmetricCsc, dense_row_threshold: float = 0.5) -> StructureStats:
    """Detect trailing dense rows and the bandwidth of the leading block.

    A row counts as dense when at least ``dense_row_threshold`` of its n
    positions are nonzero in the full symmetric pattern; the thickness is the
    longest run of dense rows ending at the last row. The bandwidth is
    max |i - j| over entries of the leading (n - thickness) block.
    """
    n = m.n
    row_counts = np.bincount(m.row_idx, minlength=n).astype(np.int64)
    row_counts += np.diff(m.col_ptr) - 1  # column counts, diagonal counted once
    need = dense_row_threshold * n
    t = 0
    while t < n and row_counts[n - 1 - t] >= need:
        t += 1
    nh = n - t
    cols = np.repeat(np.arange(n, dtype=np.int32), np.diff(m.col_ptr))
    head = m.row_idx < nh  # row >= col, so col < nh follows
    bw = int((m.row_idx[head] - cols[head]).max(initial=0))
    return StructureStats(bandwidth=bw, thickness=t, density_percent=m.density_percent)


def permute_symmetric(m: SymmetricCsc, p) -> SymmetricCsc:
    """Apply a symmetric permutation: B[p(i), p(j)] = A[i, j].

    The result is re-canonicalized to sorted lower-triangle storage.
    """
    forward = np.asarray(p.forward if hasattr(p, "forward") else p, dtype=np.int64)
    if forward.shape != (m.n,):
        raise ValueError(f"permutation length {forward.shape} does not match order {m.n}")
    check = np.zeros(m.n, dtype=bool)
    check[forward] = True
    if not check.all():
        raise ValueError("permutation is not a bijection")
    cols = np.repeat(np.arange(m.n, dtype=np.int64), np.diff(m.col_ptr))
    pi = forward[m.row_idx]
    pj = forward[cols]
    return from_coordinates(m.n, pi, pj, m.values, sum_duplicates=False)
