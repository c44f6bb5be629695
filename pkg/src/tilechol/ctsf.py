"""Compressed Tile Storage Format: a sparse matrix as a grid of fixed-size
dense tiles, with only the nonzero tiles allocated contiguously.

Tiles are stored column-major internally; ``TiledMatrix.tile`` hands out a
transposed view so tile[i, j] reads element (row i, col j) as usual. Slots
are ordered by (tile column, tile row), which is also the global target
order used by the scheduler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import SymmetricCsc, from_coordinates

_SCATTER_CHUNK = 1 << 23  # entries per packing pass, bounds transient memory


@dataclass(eq=False)
class TileGrid:
    """Occupied-tile pattern of the lower tile triangle."""

    n: int
    nt: int
    tile_rows: np.ndarray  # int32, sorted by (col, row)
    tile_cols: np.ndarray  # int32
    slot_map: np.ndarray   # int32 (T, T), -1 where empty

    @property
    def tiles_per_side(self) -> int:
        return -(-self.n // self.nt)

    @property
    def n_tiles(self) -> int:
        return self.tile_rows.size

    @property
    def occupancy(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in zip(self.tile_rows, self.tile_cols)}

    def slot(self, r: int, c: int) -> int:
        s = int(self.slot_map[r, c])
        if s < 0:
            raise KeyError(f"tile ({r}, {c}) is not allocated")
        return s

    def contains(self, r: int, c: int) -> bool:
        return self.slot_map[r, c] >= 0

    def occupancy_coordinates(self) -> str:
        """Debug dump: one 'row col' line per occupied tile."""
        return "\n".join(f"{r} {c}" for r, c in zip(self.tile_rows, self.tile_cols))


def grid_from_tiles(n: int, nt: int, rows, cols) -> TileGrid:
    """Build a TileGrid from occupied-tile coordinates (diagonals are added
    automatically, pairs normalized into the lower tile triangle)."""
    t = -(-n // nt)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    ids = np.maximum(rows, cols) * t + np.minimum(rows, cols)
    diag = np.arange(t, dtype=np.int64) * t + np.arange(t, dtype=np.int64)
    present = np.zeros(t * t, dtype=bool)
    present[ids] = True
    present[diag] = True
    occ = np.flatnonzero(present)
    r = (occ // t).astype(np.int32)
    c = (occ % t).astype(np.int32)
    order = np.lexsort((r, c))
    r, c = r[order], c[order]
    slot_map = np.full((t, t), -1, dtype=np.int32)
    slot_map[r, c] = np.arange(r.size, dtype=np.int32)
    return TileGrid(n=n, nt=nt, tile_rows=r, tile_cols=c, slot_map=slot_map)


def build_tile_grid(m: SymmetricCsc, nt: int) -> TileGrid:
    """Occupied tiles of m at tile size nt: exactly the tiles receiving at
    least one stored scalar, plus every diagonal tile."""
    if nt < 1:
        raise ValueError(f"tile size must be >= 1, got {nt}")
    cols = np.repeat(np.arange(m.n, dtype=np.int64), np.diff(m.col_ptr))
    return grid_from_tiles(m.n, nt, m.row_idx // nt, cols // nt)


@dataclass(eq=False)
class TiledMatrix:
    """Dense tiles of the lower triangle in contiguous storage.

    storage[s] holds tile slot s with element (i, j) at storage[s, j, i]
    (column-major within the tile); use ``tile`` for natural indexing.
    Boundary tiles are zero-padded, with 1.0 on padded diagonal positions so
    the tile Cholesky stays well-posed there.
    """

    grid: TileGrid
    storage: np.ndarray  # float64 (n_tiles, nt, nt), C order

    @property
    def nt(self) -> int:
        return self.grid.nt

    def tile(self, r: int, c: int) -> np.ndarray:
        return self.storage[self.grid.slot(r, c)].T

    def copy(self) -> "TiledMatrix":
        return TiledMatrix(grid=self.grid, storage=self.storage.copy())

    def get(self, i: int, j: int) -> float:
        """Scalar accessor (tests and debugging)."""
        if i < j:
            i, j = j, i
        nt = self.grid.nt
        return float(self.tile(i // nt, j // nt)[i % nt, j % nt])


def pack_into_grid(m: SymmetricCsc, grid: TileGrid) -> TiledMatrix:
    """Scatter the stored scalars of m into an allocated grid (which must
    cover m's occupied tiles, e.g. a symbolic factor grid)."""
    nt = grid.nt
    storage = np.zeros((grid.n_tiles, nt, nt))
    flat = storage.reshape(-1)
    cols = np.repeat(np.arange(m.n, dtype=np.int64), np.diff(m.col_ptr))
    rows = m.row_idx
    for lo in range(0, rows.size, _SCATTER_CHUNK):
        hi = min(lo + _SCATTER_CHUNK, rows.size)
        r = rows[lo:hi].astype(np.int64)
        c = cols[lo:hi]
        slot = grid.slot_map[r // nt, c // nt].astype(np.int64)
        if slot.min(initial=0) < 0:
            raise ValueError("grid does not cover the matrix pattern")
        flat[slot * (nt * nt) + (c % nt) * nt + (r % nt)] = m.values[lo:hi]
    pad_from = m.n % nt
    if pad_from:
        last = grid.slot(grid.tiles_per_side - 1, grid.tiles_per_side - 1)
        for loc in range(pad_from, nt):
            storage[last, loc, loc] = 1.0
    return TiledMatrix(grid=grid, storage=storage)


def pack_ctsf(m: SymmetricCsc, nt: int) -> TiledMatrix:
    """Map m into compressed tile storage at tile size nt."""
    return pack_into_grid(m, build_tile_grid(m, nt))


def expand_to_grid(t: TiledMatrix, grid: TileGrid) -> TiledMatrix:
    """Re-home tiles into a larger grid (extra slots stay zero)."""
    if grid.n_tiles == t.grid.n_tiles and np.array_equal(grid.slot_map, t.grid.slot_map):
        return t
    storage = np.zeros((grid.n_tiles, grid.nt, grid.nt))
    dst = grid.slot_map[t.grid.tile_rows, t.grid.tile_cols]
    if dst.min(initial=0) < 0:
        raise ValueError("target grid does not cover the source occupancy")
    storage[dst.astype(np.int64)] = t.storage
    return TiledMatrix(grid=grid, storage=storage)


def unpack_to_csc(t: TiledMatrix) -> SymmetricCsc:
    """Gather tile storage back into scalar CSC form.

    Padding is dropped, as are positions that are exactly zero (structural
    zeros inside allocated tiles do not reappear).
    """
    nt = t.grid.nt
    n = t.grid.n
    loc_r, loc_c = np.meshgrid(np.arange(nt), np.arange(nt), indexing="ij")
    loc_r = loc_r.ravel()
    loc_c = loc_c.ravel()
    out_r, out_c, out_v = [], [], []
    for s in range(t.grid.n_tiles):
        tr = int(t.grid.tile_rows[s])
        tc = int(t.grid.tile_cols[s])
        vals = t.storage[s].T.ravel()  # vals[k] pairs with (loc_r[k], loc_c[k])
        gi = tr * nt + loc_r
        gj = tc * nt + loc_c
        keep = (vals != 0.0) & (gi < n) & (gj < n) & (gi >= gj)
        if tr == tc:
            keep &= loc_r >= loc_c
        out_r.append(gi[keep])
        out_c.append(gj[keep])
        out_v.append(vals[keep])
    return from_coordinates(n, np.concatenate(out_r), np.concatenate(out_c),
                            np.concatenate(out_v), sum_duplicates=False)
