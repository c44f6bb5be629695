"""Tile-level symbolic factorization and static task planning.

Produces the factor tile pattern, the left-looking task stream, per-worker
task assignment tables, tree-reduction plans for long accumulation chains,
and DAG statistics / DOT export for inspection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .ctsf import TileGrid, grid_from_tiles

# task type codes (GEADD/ZERO are scheduler-internal extensions)
T_POTRF, T_SYRK, T_TRSM, T_GEMM, T_GEADD, T_ZERO = 1, 2, 3, 4, 5, 6

TYPE_NAMES = {1: "POTRF", 2: "SYRK", 3: "TRSM", 4: "GEMM", 5: "GEADD", 6: "ZERO"}


class Task(NamedTuple):
    """One tile task; type 1=POTRF, 2=SYRK, 3=TRSM, 4=GEMM."""

    m: int
    k: int
    n: int
    type: int


@dataclass(eq=False)
class TaskList:
    """A batch of tasks as parallel arrays, in execution order."""

    task_type: np.ndarray  # int8
    m: np.ndarray          # int32
    k: np.ndarray          # int32
    n: np.ndarray          # int32
    target: np.ndarray     # int32, factor slot receiving the update

    def __len__(self) -> int:
        return self.task_type.size

    def __getitem__(self, idx) -> Task:
        return Task(int(self.m[idx]), int(self.k[idx]), int(self.n[idx]),
                    int(self.task_type[idx]))

    def take(self, positions: np.ndarray) -> "TaskList":
        return TaskList(self.task_type[positions], self.m[positions],
                        self.k[positions], self.n[positions], self.target[positions])

    def counts_by_type(self) -> dict[str, int]:
        out = {}
        for code, name in TYPE_NAMES.items():
            c = int(np.count_nonzero(self.task_type == code))
            if c or code <= 4:
                out[name] = c
        return out

    def to_tuples(self) -> list[Task]:
        return [self[i] for i in range(len(self))]


@dataclass(eq=False)
class TileSymbolic:
    """Factor tile pattern with accumulation counts.

    factor_grid's slots are ordered by (tile column, tile row); that order is
    the global target order everywhere in the scheduler.
    """

    grid: TileGrid          # input occupancy
    factor_grid: TileGrid   # input occupancy plus fill tiles
    accum: np.ndarray       # int64 per factor slot: SYRK/GEMM updates received

    @property
    def tiles_per_side(self) -> int:
        return self.grid.tiles_per_side

    @property
    def factor_occupancy(self) -> set[tuple[int, int]]:
        return self.factor_grid.occupancy

    def accum_count(self, m: int, k: int) -> int:
        return int(self.accum[self.factor_grid.slot(m, k)])

    def neighbors(self, k: int) -> np.ndarray:
        """Sorted tile indices m with factor tile (m, k) or (k, m) nonzero."""
        t = self.tiles_per_side
        col = self.factor_grid.slot_map[k:, k] >= 0
        row = self.factor_grid.slot_map[k, :k + 1] >= 0
        out = np.concatenate([np.flatnonzero(row), np.flatnonzero(col) + k])
        return np.unique(out)


def tile_symbolic_factorize(g: TileGrid) -> TileSymbolic:
    """Symbolic Cholesky on the tile adjacency graph.

    For ascending k, all pairs of below-diagonal neighbors of column k become
    factor tiles (the elimination game at tile granularity); accumulation
    counts follow from the strict-lower factor pattern.
    """
    t = g.tiles_per_side
    f = np.zeros((t, t), dtype=bool)
    f[g.tile_rows, g.tile_cols] = True
    for k in range(t):
        h = np.flatnonzero(f[k + 1:, k]) + (k + 1)
        if h.size > 1:
            f[np.ix_(h, h)] = True
    f = np.tril(f)
    rows, cols = np.nonzero(f)
    fgrid = grid_from_tiles(g.n, g.nt, rows, cols)
    s = np.tril(f, -1)
    accum = np.zeros(fgrid.n_tiles, dtype=np.int64)
    for k in range(t):
        down = np.flatnonzero(s[k:, k]) + k  # off-diagonal factor tiles (m, k)
        accum[fgrid.slot_map[k, k]] = int(s[k, :k].sum())
        if down.size:
            common = np.logical_and(s[down][:, :k], s[k, :k]).sum(axis=1)
            accum[fgrid.slot_map[down, k]] = common
    return TileSymbolic(grid=g, factor_grid=fgrid, accum=accum)


def enumerate_tasks(s: TileSymbolic) -> TaskList:
    """Left-looking task stream: for each k ascending, SYRKs into (k,k) by
    ascending n, POTRF(k), then per m > k with (m,k) in the factor its GEMMs
    by ascending n followed by its TRSM."""
    t = s.tiles_per_side
    fg = s.factor_grid
    strict = np.zeros((t, t), dtype=bool)
    off = fg.tile_rows != fg.tile_cols
    strict[fg.tile_rows[off], fg.tile_cols[off]] = True
    chunks_type, chunks_m, chunks_k, chunks_n = [], [], [], []
    for k in range(t):
        row_k = strict[k, :k]
        syrk_ns = np.flatnonzero(row_k).astype(np.int32)
        offm = (np.flatnonzero(strict[k + 1:, k]) + (k + 1)).astype(np.int32)
        if offm.size:
            gmask = np.logical_and(strict[offm.astype(np.int64)][:, :k], row_k)
            gcounts = gmask.sum(axis=1)
            mi, nn = np.nonzero(gmask)
            ins = np.cumsum(gcounts)
            tail_type = np.insert(np.full(mi.size, T_GEMM, dtype=np.int8), ins, T_TRSM)
            tail_m = np.insert(offm[mi], ins, offm)
            tail_n = np.insert(nn.astype(np.int32), ins, 0)
        else:
            tail_type = np.empty(0, dtype=np.int8)
            tail_m = np.empty(0, dtype=np.int32)
            tail_n = np.empty(0, dtype=np.int32)
        ns = syrk_ns.size
        chunks_type.append(np.concatenate([np.full(ns, T_SYRK, dtype=np.int8),
                                           np.array([T_POTRF], dtype=np.int8), tail_type]))
        chunks_m.append(np.concatenate([np.full(ns, k, dtype=np.int32),
                                        np.array([k], dtype=np.int32), tail_m]))
        chunks_n.append(np.concatenate([syrk_ns, np.array([0], dtype=np.int32), tail_n]))
        chunks_k.append(np.full(ns + 1 + tail_type.size, k, dtype=np.int32))
    task_type = np.concatenate(chunks_type)
    m = np.concatenate(chunks_m)
    k_arr = np.concatenate(chunks_k)
    n = np.concatenate(chunks_n)
    target = fg.slot_map[m.astype(np.int64), k_arr.astype(np.int64)]
    return TaskList(task_type=task_type, m=m, k=k_arr, n=n, target=target.astype(np.int32))


@dataclass(eq=False)
class TaskTable:
    """Static schedule: per-worker ordered task lists plus tile ownership.

    Ownership is round-robin over the global target-tile order (k ascending,
    diagonal first, then rows ascending), so accumulation groups stay whole
    and contiguous on their owner's list.
    """

    symbolic: TileSymbolic
    worker_count: int
    global_tasks: TaskList
    positions: list[np.ndarray]  # per worker: indices into global_tasks

    def worker_tasks(self, w: int) -> TaskList:
        return self.global_tasks.take(self.positions[w])

    def owner_of(self, m: int, k: int) -> int:
        return int(self.symbolic.factor_grid.slot(m, k)) % self.worker_count

    @property
    def ownership(self) -> dict[tuple[int, int], int]:
        fg = self.symbolic.factor_grid
        return {(int(r), int(c)): int(s) % self.worker_count
                for s, (r, c) in enumerate(zip(fg.tile_rows, fg.tile_cols))}

    def to_json(self) -> str:
        workers = []
        for w in range(self.worker_count):
            tl = self.worker_tasks(w)
            workers.append([{"m": t.m, "k": t.k, "n": t.n, "type": t.type}
                            for t in tl.to_tuples()])
        fg = self.symbolic.factor_grid
        owners = [[int(r), int(c), int(s) % self.worker_count]
                  for s, (r, c) in enumerate(zip(fg.tile_rows, fg.tile_cols))]
        return json.dumps({"worker_count": self.worker_count,
                           "workers": workers, "ownership": owners})


def build_task_table(s: TileSymbolic, workers: int) -> TaskTable:
    """Assign each factor tile's task group to worker (slot ordinal mod
    workers); every worker keeps its groups in global order."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    tasks = enumerate_tasks(s)
    owner = tasks.target % workers
    positions = [np.flatnonzero(owner == w) for w in range(workers)]
    return TaskTable(symbolic=s, worker_count=workers, global_tasks=tasks,
                     positions=positions)


@dataclass(frozen=True)
class ReducedChain:
    """Tree-reduction layout for one long accumulation chain."""

    slot: int                          # factor slot being reduced
    ranges: tuple[tuple[int, int], ...]  # per worker: [start, end) of the chain
    combine: tuple[tuple[int, int], ...]  # GEADD steps (dst_worker, src_worker)


@dataclass(eq=False)
class ReductionPlan:
    """Accumulation chains split across workers with binary GEADD combines."""

    workers: int
    chains: dict[int, ReducedChain] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.chains)

    def chain_for_tile(self, s: TileSymbolic, m: int, k: int) -> ReducedChain | None:
        return self.chains.get(s.factor_grid.slot(m, k))


def _combine_steps(r: int) -> tuple[tuple[int, int], ...]:
    steps = []
    stride = 1
    while stride < r:
        for a in range(0, r, 2 * stride):
            b = a + stride
            if b < r:
                steps.append((a, b))
        stride *= 2
    return tuple(steps)


def plan_tree_reduction(s: TileSymbolic, workers: int) -> ReductionPlan:
    """Split every accumulation chain of length >= 2 * workers into
    near-equal contiguous per-worker ranges combined by a balanced binary
    GEADD tree; shorter chains are left alone."""
    if workers < 2:
        raise ValueError("tree reduction needs at least 2 workers")
    plan = ReductionPlan(workers=workers)
    threshold = 2 * workers
    for slot in np.flatnonzero(s.accum >= threshold):
        c = int(s.accum[slot])
        base, rem = divmod(c, workers)
        sizes = [base + 1] * rem + [base] * (workers - rem)
        edges = np.concatenate([[0], np.cumsum(sizes)])
        ranges = tuple((int(edges[i]), int(edges[i + 1])) for i in range(workers))
        plan.chains[int(slot)] = ReducedChain(slot=int(slot), ranges=ranges,
                                              combine=_combine_steps(workers))
    return plan


@dataclass(frozen=True)
class DagStats:
    """Shape of the task-precedence DAG."""

    counts: dict
    total_tasks: int
    critical_path: int  # unit-cost longest path, in tasks
    max_width: int      # widest level of the longest-path layering

    def to_json(self) -> str:
        return json.dumps({"counts": self.counts, "total_tasks": self.total_tasks,
                           "critical_path": self.critical_path,
                           "max_width": self.max_width})


def _dag_predecessors(s: TileSymbolic, tasks: TaskList):
    """Per task: list of predecessor positions (accumulation chains are
    serialized per target tile; cross edges follow the data dependencies of
    the left-looking algorithm)."""
    fg = s.factor_grid
    n_tasks = len(tasks)
    target = tasks.target
    fin_pos = np.full(fg.n_tiles, -1, dtype=np.int64)
    ends = np.flatnonzero(np.r_[target[1:] != target[:-1], True])
    fin_pos[target[ends].astype(np.int64)] = ends
    preds: list[list[int]] = [[] for _ in range(n_tasks)]
    for p in range(n_tasks):
        if p > 0 and target[p] == target[p - 1]:
            preds[p].append(p - 1)  # same-tile chain
        tt = tasks.task_type[p]
        k = int(tasks.k[p])
        n = int(tasks.n[p])
        m = int(tasks.m[p])
        if tt == T_SYRK:
            preds[p].append(int(fin_pos[fg.slot(k, n)]))
        elif tt == T_GEMM:
            preds[p].append(int(fin_pos[fg.slot(k, n)]))
            preds[p].append(int(fin_pos[fg.slot(m, n)]))
        elif tt == T_TRSM:
            preds[p].append(int(fin_pos[fg.slot(k, k)]))
    return preds


def dag_stats(s: TileSymbolic) -> DagStats:
    """Task counts, unit-cost critical path, and maximum level width of the
    precedence DAG."""
    tasks = enumerate_tasks(s)
    preds = _dag_predecessors(s, tasks)
    level = np.zeros(len(tasks), dtype=np.int64)
    for p in range(len(tasks)):  # enumeration order is topological
        lp = 0
        for q in preds[p]:
            if level[q] >= lp:
                lp = level[q] + 1
        level[p] = lp
    width = int(np.bincount(level).max()) if len(tasks) else 0
    cp = int(level.max()) + 1 if len(tasks) else 0
    counts = tasks.counts_by_type()
    return DagStats(counts=counts, total_tasks=len(tasks), critical_path=cp,
                    max_width=width)


def dag_to_dot(s: TileSymbolic) -> str:
    """Precedence DAG in DOT format, one node per task."""
    tasks = enumerate_tasks(s)
    preds = _dag_predecessors(s, tasks)
    lines = ["digraph tasks {"]
    for p in range(len(tasks)):
        t = tasks[p]
        if t.type == T_POTRF:
            label = f"POTRF({t.k})"
        elif t.type == T_SYRK:
            label = f"SYRK({t.k},{t.n})"
        elif t.type == T_TRSM:
            label = f"TRSM({t.m},{t.k})"
        else:
            label = f"GEMM({t.m},{t.k},{t.n})"
        lines.append(f'  t{p} [label="{label}"];')
    for p in range(len(tasks)):
        for q in preds[p]:
            lines.append(f"  t{q} -> t{p};")
    lines.append("}")
    return "\n".join(lines) + "\n"
