"""
Sparse GF(2) linear algebra for banded generator matrices.

Rows are global data-symbol sequence numbers and are never renumbered, columns
are parity equations. A column's right-hand side is the XOR of the parity
payload and every known symbol that has been substituted into it.
"""
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

# Symbol payload: a fixed-width bit string held in an int. XOR is bitwise.
BitBlock = int


@dataclass(slots=True)
class SparseColumn:
    rows: set[int]
    rhs: BitBlock = 0

    @classmethod
    def of(cls, rows: Iterable[int], rhs: BitBlock = 0) -> "SparseColumn":
        return cls(set(rows), rhs)

    def sorted_rows(self) -> list[int]:
        return sorted(self.rows)

    def copy(self) -> "SparseColumn":
        return SparseColumn(set(self.rows), self.rhs)

    def __len__(self) -> int:
        return len(self.rows)


def xor_into(target: SparseColumn, source: SparseColumn) -> SparseColumn:
    """Elementary column operation: target <- target + source (in place)"""
    target.rows ^= source.rows
    target.rhs ^= source.rhs
    return target


@dataclass
class SparseGf2Matrix:
    columns: list[SparseColumn] = field(default_factory=list)
    active_rows: set[int] = field(default_factory=set)

    @classmethod
    def from_columns(
        cls, columns: Iterable[Iterable[int]], active_rows: Iterable[int] | None = None
    ) -> "SparseGf2Matrix":
        cols = [SparseColumn.of(c) for c in columns]
        if active_rows is None:
            rows: set[int] = set()
            for c in cols:
                rows |= c.rows
        else:
            rows = set(active_rows)
        matrix = cls(active_rows=rows)
        for c in cols:
            matrix.add_column(c)
        return matrix

    def add_column(self, column: SparseColumn) -> None:
        stray = column.rows - self.active_rows
        if stray:
            raise ValueError(f"column references inactive rows {sorted(stray)}")
        self.columns.append(column)

    def columns_with(self, row: int) -> list[SparseColumn]:
        return [c for c in self.columns if row in c.rows]

    def is_banded(self, window: int) -> bool:
        """True when no column spans more than `window` rows"""
        return all(not c.rows or max(c.rows) - min(c.rows) < window for c in self.columns)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.active_rows), len(self.columns)


def rank(m: SparseGf2Matrix) -> int:
    """GF(2) rank of the column set; the matrix is left untouched"""
    basis: dict[int, int] = {}
    position = {row: i for i, row in enumerate(sorted(m.active_rows))}
    for column in m.columns:
        mask = 0
        for row in column.rows:
            mask |= 1 << position[row]
        while mask:
            pivot = mask.bit_length() - 1
            if pivot not in basis:
                basis[pivot] = mask
                break
            mask ^= basis[pivot]
    return len(basis)


def prune_row(m: SparseGf2Matrix, row: int) -> SparseGf2Matrix:
    """Drop `row` and every column with a one in it"""
    if row not in m.active_rows:
        logger.warning("prune_row: row %d is not active, nothing pruned", row)
        return m
    m.active_rows.discard(row)
    m.columns = [c for c in m.columns if row not in c.rows]
    return m


def fold_row(m: SparseGf2Matrix, row: int) -> SparseGf2Matrix:
    """
    Eliminate `row` keeping every combination of columns that does not use it.

    The first column holding the row is added to the others, which clears the
    row from them, and is then pruned together with the row. The surviving
    span is exactly {v in span(m) : v[row] = 0}.
    """
    holders = m.columns_with(row)
    if holders:
        first, rest = holders[0], holders[1:]
        for column in rest:
            xor_into(column, first)
    return prune_row(m, row)


def dense_solve(columns: Iterable[SparseColumn], unknowns: Iterable[int]) -> tuple[int, dict[int, BitBlock]]:
    """
    Dense reference elimination: returns (rank, {unknown: value}) for every
    unknown that the equations pin down. Oracle for the sparse decoders.
    """
    order = sorted(set(unknowns))
    position = {row: i for i, row in enumerate(order)}
    cols = list(columns)
    n = len(order)
    if not cols or n == 0:
        return 0, {}
    a = np.zeros((len(cols), n), dtype=np.uint8)
    rhs = [c.rhs for c in cols]
    for i, c in enumerate(cols):
        for row in c.rows:
            a[i, position[row]] = 1

    # Reduced row echelon form over GF(2); payload rhs carried as python ints.
    pivot_row = 0
    pivots: list[int] = []
    for col in range(n):
        candidates = np.nonzero(a[pivot_row:, col])[0]
        if candidates.size == 0:
            continue
        swap = pivot_row + int(candidates[0])
        if swap != pivot_row:
            a[[pivot_row, swap]] = a[[swap, pivot_row]]
            rhs[pivot_row], rhs[swap] = rhs[swap], rhs[pivot_row]
        for r in np.nonzero(a[:, col])[0]:
            r = int(r)
            if r != pivot_row:
                a[r] ^= a[pivot_row]
                rhs[r] ^= rhs[pivot_row]
        pivots.append(col)
        pivot_row += 1
        if pivot_row == len(cols):
            break

    solved: dict[int, BitBlock] = {}
    for r, col in enumerate(pivots):
        if int(a[r].sum()) == 1:
            solved[order[col]] = rhs[r]
    return len(pivots), solved
