"""
Receivers for the sliding-window code.

All decoders share the bookkeeping in `Decoder`: the packet clock, the ordered
set of missing data symbols, the recent known symbol values needed to strip
received parities down to their unknowns, and the recovery log. They differ in
how the pending parity equations are kept and solved:

- GaussianDecoder keeps the equations in reduced (I_t; A) form and updates it
  one column at a time (optimal). With `d_max` set it becomes the truncation
  decoder that gives up on symbols older than d_max packets.
- PeelingDecoder only ever resolves degree-one equations (linear time, may stall).
- InactivationDecoder peels, and when peeling stalls inactivates variables and
  finishes the small dense system (optimal).
"""
import logging
from dataclasses import dataclass, field
from enum import StrEnum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from slidingfountain.channel import Delivered, Lost, Outcome
from slidingfountain.codec import CodecConfig, Packet, reconstruct_indices
from slidingfountain.errors import DecodingFault, OrderingError
from slidingfountain.gf2 import BitBlock, SparseColumn, SparseGf2Matrix, fold_row, xor_into

logger = logging.getLogger(__name__)


class Variant(StrEnum):
    GE = "ge"
    PEELING = "peeling"
    INACTIVATION = "inactivation"
    TRUNCATED_GE = "truncated_ge"


class DecoderConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: Variant = Variant.GE
    d_max: int | None = Field(default=None, ge=1)
    codec: CodecConfig = Field(default_factory=CodecConfig)

    @model_validator(mode="after")
    def _check_d_max(self) -> "DecoderConfig":
        if self.variant is Variant.TRUNCATED_GE and self.d_max is None:
            raise ValueError("truncated_ge needs d_max")
        if self.variant is not Variant.TRUNCATED_GE and self.d_max is not None:
            raise ValueError(f"d_max only applies to truncated_ge, not {self.variant}")
        return self

    @property
    def label(self) -> str:
        if self.variant is Variant.TRUNCATED_GE:
            return f"{self.variant}_{self.d_max}"
        return str(self.variant)


@dataclass(frozen=True, slots=True)
class RecoveryEvent:
    symbol: int
    value: BitBlock
    delay: int


class ReduceResult(StrEnum):
    INSERTED = "inserted"
    DEPENDENT = "dependent"


@dataclass
class DecoderState:
    clock: int = -1
    # insertion ordered, and symbols are always lost in increasing order
    missing: dict[int, None] = field(default_factory=dict)
    recovered_log: list[RecoveryEvent] = field(default_factory=list)


class Decoder:
    """Shared receiver bookkeeping; subclasses decide how equations are solved"""

    variant: Variant

    def __init__(self, config: DecoderConfig):
        self.config = config
        self.codec = config.codec
        self.state = DecoderState()
        self.known: dict[int, BitBlock] = {}
        self.discarded: set[int] = set()
        self.samples: list[tuple[int, int]] = []
        self.column_ops = 0
        self.inactivations = 0
        self.dependent_discards = 0

    # -- input -----------------------------------------------------------------

    def ingest(self, outcome: Outcome) -> list[RecoveryEvent]:
        """
        Feed the next channel outcome. A sequence gap is read as the skipped
        packets having been lost; going backwards or repeating is an error and
        leaves the state alone.
        """
        seq = outcome.seq
        if seq <= self.state.clock:
            raise OrderingError(f"packet {seq} arrived at clock {self.state.clock}")
        events: list[RecoveryEvent] = []
        for skipped in range(self.state.clock + 1, seq):
            events += self._step(Lost(skipped))
        events += self._step(outcome)
        return events

    def receive(self, packet: Packet) -> list[RecoveryEvent]:
        """Trace-replay entry point: losses are inferred from sequence gaps"""
        return self.ingest(Delivered(packet))

    def add_equations(self, missing: list[int], columns: list[SparseColumn]) -> list[RecoveryEvent]:
        """Mark `missing` as lost and solve the given parity equations against them"""
        for idx in missing:
            self.state.missing.setdefault(idx, None)
        return self._absorb([c.copy() for c in columns])

    def _step(self, outcome: Outcome) -> list[RecoveryEvent]:
        self.state.clock = outcome.seq
        self.truncate()
        events = self._settle()
        l = self.codec.segments
        first = outcome.seq * l
        if isinstance(outcome, Lost):
            for idx in range(first, first + l):
                self.state.missing[idx] = None
        else:
            packet = outcome.packet
            for i, value in enumerate(packet.data):
                self.known[first + i] = value
            columns = self._parity_columns(packet)
            events += self._absorb(columns)
        self._forget_old()
        self.samples.append((len(self.state.missing), self.equation_count()))
        return events

    def _parity_columns(self, packet: Packet) -> list[SparseColumn]:
        columns = []
        for slot, indices in enumerate(reconstruct_indices(packet.seq, self.codec)):
            if any(idx in self.discarded for idx in indices):
                continue
            columns.append(SparseColumn(set(indices), packet.parity[slot]))
        return columns

    def _substitute(self, column: SparseColumn) -> SparseColumn:
        """Strip symbols whose value is already known into the right-hand side"""
        for idx in [r for r in column.rows if r not in self.state.missing]:
            if idx not in self.known:
                raise DecodingFault(f"symbol {idx} is neither known nor missing at clock {self.state.clock}")
            column.rows.discard(idx)
            column.rhs ^= self.known[idx]
        if not column.rows and column.rhs:
            raise DecodingFault(f"parity at clock {self.state.clock} contradicts known symbols")
        return column

    def _forget_old(self) -> None:
        # parities of later packets only reach back `window` symbols
        horizon = (self.state.clock + 1) * self.codec.segments - self.codec.window
        if len(self.known) > 2 * self.codec.window + self.codec.segments:
            self.known = {k: v for k, v in self.known.items() if k >= horizon}
        if self.discarded and min(self.discarded) < horizon:
            self.discarded = {k for k in self.discarded if k >= horizon}

    def _recover(self, symbol: int, value: BitBlock) -> RecoveryEvent:
        del self.state.missing[symbol]
        self.known[symbol] = value
        event = RecoveryEvent(symbol, value, self.state.clock - symbol // self.codec.segments)
        self.state.recovered_log.append(event)
        return event

    # -- hooks -----------------------------------------------------------------

    def _absorb(self, columns: list[SparseColumn]) -> list[RecoveryEvent]:
        raise NotImplementedError

    def equation_count(self) -> int:
        raise NotImplementedError

    def columns(self) -> list[SparseColumn]:
        raise NotImplementedError

    def truncate(self) -> list[int]:
        """Only the truncation decoder discards symbols"""
        return []

    def _settle(self) -> list[RecoveryEvent]:
        """Solutions left behind by truncation"""
        return []

    def matrix(self) -> SparseGf2Matrix:
        """Snapshot of the pending system (copies, safe to mutate)"""
        return SparseGf2Matrix([c.copy() for c in self.columns()], set(self.state.missing))

    def counters(self) -> dict[str, int]:
        """Work done so far, in the keyword form `metrics.finalize` takes"""
        return {
            "column_ops": self.column_ops,
            "inactivations": self.inactivations,
            "dependent_discards": self.dependent_discards,
        }


class GaussianDecoder(Decoder):
    """
    Continuous Gaussian elimination. `pivots` maps each pivot row to the only
    column containing it, every other row of a column is a non-pivot row, so the
    columns read as (I_t; A) under the pivot order. `holders` indexes every row
    to the pivots of the columns it appears in.
    """

    variant = Variant.GE

    def __init__(self, config: DecoderConfig):
        super().__init__(config)
        self.pivots: dict[int, SparseColumn] = {}
        self.holders: dict[int, set[int]] = {}
        self._ready: set[int] = set()
        self.d_max = config.d_max

    def equation_count(self) -> int:
        return len(self.pivots)

    def columns(self) -> list[SparseColumn]:
        return list(self.pivots.values())

    def _absorb(self, columns: list[SparseColumn]) -> list[RecoveryEvent]:
        events = []
        for column in columns:
            self.reduce_incremental(self._substitute(column))
            events += self.solve_ready()
        return events

    def _xor(self, pivot: int, source: SparseColumn) -> None:
        for row in source.rows:
            holders = self.holders.setdefault(row, set())
            holders ^= {pivot}
            if not holders:
                del self.holders[row]
        target = xor_into(self.pivots[pivot], source)
        self.column_ops += 1
        if len(target.rows) == 1:
            self._ready.add(pivot)

    def _register(self, pivot: int, column: SparseColumn) -> None:
        self.pivots[pivot] = column
        for row in column.rows:
            self.holders.setdefault(row, set()).add(pivot)
        if len(column.rows) == 1:
            self._ready.add(pivot)

    def _unregister(self, pivot: int) -> SparseColumn:
        column = self.pivots.pop(pivot)
        for row in column.rows:
            holders = self.holders[row]
            holders.discard(pivot)
            if not holders:
                del self.holders[row]
        return column

    def reduce_incremental(self, column: SparseColumn) -> ReduceResult:
        """
        Reduce a new parity column against the existing pivots and, if anything
        is left, make its lowest row a new pivot and clear that row from every
        other column. Dependent columns are discarded.
        """
        for row in [r for r in column.rows if r in self.pivots]:
            xor_into(column, self.pivots[row])
            self.column_ops += 1
        if not column.rows:
            if column.rhs:
                raise DecodingFault(f"inconsistent parity at clock {self.state.clock}")
            self.dependent_discards += 1
            return ReduceResult.DEPENDENT
        pivot = min(column.rows)
        for other in list(self.holders.get(pivot, ())):
            self._xor(other, column)
        self._register(pivot, column)
        return ReduceResult.INSERTED

    def solve_ready(self) -> list[RecoveryEvent]:
        """
        Resolve every unit column. In reduced form a solved pivot appears in no
        other column, so removing the row and its column is the substitution.
        """
        events = []
        while self._ready:
            pivot = self._ready.pop()
            column = self.pivots.get(pivot)
            if column is None or len(column.rows) != 1:
                continue
            self._unregister(pivot)
            events.append(self._recover(pivot, column.rhs))
        return events

    def _settle(self) -> list[RecoveryEvent]:
        return self.solve_ready()

    def truncate(self) -> list[int]:
        """Discard missing symbols older than d_max packets and fold them out of the matrix"""
        if self.d_max is None:
            return []
        discarded = []
        l = self.codec.segments
        while self.state.missing:
            oldest = next(iter(self.state.missing))
            if self.state.clock - oldest // l <= self.d_max:
                break
            del self.state.missing[oldest]
            self.discarded.add(oldest)
            self._fold(oldest)
            discarded.append(oldest)
        if discarded:
            logger.debug("clock %d: discarded %d symbols older than %d packets",
                         self.state.clock, len(discarded), self.d_max)
        return discarded

    def _fold(self, row: int) -> None:
        """
        Run `fold_row` on a view of the columns holding `row`. The first one
        (lowest pivot) is consumed, the rest keep their pivots: only non-pivot
        rows change, so the reduced form survives.
        """
        holders = sorted(self.holders.get(row, ()))
        if not holders:
            return
        columns = [self._unregister(p) for p in holders]
        view = SparseGf2Matrix(columns, set().union(*(c.rows for c in columns)))
        fold_row(view, row)
        self.column_ops += len(holders) - 1
        for pivot, column in zip(holders[1:], view.columns):
            self._register(pivot, column)


class TruncatedGaussianDecoder(GaussianDecoder):
    variant = Variant.TRUNCATED_GE


class PeelingDecoder(Decoder):
    """Message passing: solve degree-one equations and substitute, nothing else"""

    variant = Variant.PEELING

    def __init__(self, config: DecoderConfig):
        super().__init__(config)
        self.equations: dict[int, SparseColumn] = {}
        self.holders: dict[int, set[int]] = {}
        self._next_id = 0
        self._ready: set[int] = set()
        self._touched: set[int] = set()

    def equation_count(self) -> int:
        return len(self.equations)

    def columns(self) -> list[SparseColumn]:
        return list(self.equations.values())

    def _absorb(self, columns: list[SparseColumn]) -> list[RecoveryEvent]:
        self._touched = set()
        events = []
        for column in columns:
            column = self._substitute(column)
            if column.rows:
                self._add(column)
            events += self.peel()
        return events

    def _add(self, column: SparseColumn) -> None:
        eid = self._next_id
        self._next_id += 1
        self.equations[eid] = column
        for row in column.rows:
            self.holders.setdefault(row, set()).add(eid)
        self._touched |= column.rows
        if len(column.rows) == 1:
            self._ready.add(eid)

    def _drop(self, eid: int) -> SparseColumn:
        column = self.equations.pop(eid)
        for row in column.rows:
            holders = self.holders[row]
            holders.discard(eid)
            if not holders:
                del self.holders[row]
        return column

    def _assign(self, symbol: int, value: BitBlock) -> RecoveryEvent:
        """Record a solved symbol and substitute it into every pending equation"""
        event = self._recover(symbol, value)
        for eid in self.holders.pop(symbol, set()):
            column = self.equations[eid]
            column.rows.discard(symbol)
            column.rhs ^= value
            self.column_ops += 1
            if not column.rows:
                if column.rhs:
                    raise DecodingFault(f"inconsistent equation after solving symbol {symbol}")
                del self.equations[eid]
            else:
                self._touched |= column.rows
                if len(column.rows) == 1:
                    self._ready.add(eid)
        return event

    def peel(self) -> list[RecoveryEvent]:
        """Repeat degree-one resolution until no equation has a single unknown"""
        events = []
        while self._ready:
            eid = self._ready.pop()
            column = self.equations.get(eid)
            if column is None or len(column.rows) != 1:
                continue
            self._drop(eid)
            (symbol,) = column.rows
            events.append(self._assign(symbol, column.rhs))
        return events


@dataclass(slots=True)
class _SymbolicEquation:
    active: set[int]
    rhs: BitBlock
    inactive: int = 0  # bitmask over inactivated variables


class InactivationDecoder(PeelingDecoder):
    """
    Peeling that does not give up: when it stalls, the most connected unknown
    is inactivated (treated as a known symbol) and peeling goes on with every
    active unknown written as value + combination of inactive ones. The small
    inactive system is then eliminated densely and back-substituted.
    """

    variant = Variant.INACTIVATION

    def _absorb(self, columns: list[SparseColumn]) -> list[RecoveryEvent]:
        events = super()._absorb(columns)
        if self.equations and self._touched:
            events += self.inactivation_solve()
        return events

    def _component(self, seeds: set[int]) -> tuple[set[int], set[int]]:
        """Equations and unknowns reachable from `seeds` in the pending system"""
        rows = {r for r in seeds if r in self.holders}
        frontier = list(rows)
        eids: set[int] = set()
        while frontier:
            row = frontier.pop()
            for eid in self.holders.get(row, ()):
                if eid in eids:
                    continue
                eids.add(eid)
                for other in self.equations[eid].rows:
                    if other not in rows:
                        rows.add(other)
                        frontier.append(other)
        return eids, rows

    def inactivation_solve(self) -> list[RecoveryEvent]:
        eids, _ = self._component(self._touched)
        self._touched = set()
        if not eids:
            return []

        system = {eid: _SymbolicEquation(set(self.equations[eid].rows), self.equations[eid].rhs) for eid in eids}
        holders: dict[int, set[int]] = {}
        for eid, eq in system.items():
            for row in eq.active:
                holders.setdefault(row, set()).add(eid)

        inactive_bit: dict[int, int] = {}
        solved: dict[int, tuple[BitBlock, int]] = {}
        ready = {eid for eid, eq in system.items() if len(eq.active) == 1}
        while True:
            while ready:
                eid = ready.pop()
                eq = system.get(eid)
                if eq is None or len(eq.active) != 1:
                    continue
                del system[eid]
                (symbol,) = eq.active
                solved[symbol] = (eq.rhs, eq.inactive)
                for other in holders.pop(symbol, set()) - {eid}:
                    target = system[other]
                    target.active.discard(symbol)
                    target.rhs ^= eq.rhs
                    target.inactive ^= eq.inactive
                    self.column_ops += 1
                    if len(target.active) == 1:
                        ready.add(other)
            pending = [row for row, hs in holders.items() if hs]
            if not pending:
                break
            # highest degree first, lowest index on ties
            choice = min(pending, key=lambda r: (-len(holders[r]), r))
            inactive_bit[choice] = 1 << len(inactive_bit)
            self.inactivations += 1
            for eid in holders.pop(choice):
                target = system[eid]
                target.active.discard(choice)
                target.inactive ^= inactive_bit[choice]
                if len(target.active) == 1:
                    ready.add(eid)

        # Whatever is left constrains only inactive variables.
        basis: dict[int, tuple[int, BitBlock]] = {}
        for eq in system.values():
            mask, rhs = _reduce(eq.inactive, eq.rhs, basis)
            if mask:
                basis[mask.bit_length() - 1] = (mask, rhs)
            elif rhs:
                raise DecodingFault(f"inconsistent inactive system at clock {self.state.clock}")

        resolved: list[tuple[int, BitBlock]] = []
        for symbol, bit in inactive_bit.items():
            mask, value = _reduce(bit, 0, basis)
            if not mask:
                resolved.append((symbol, value))
        for symbol, (value, combo) in solved.items():
            mask, value = _reduce(combo, value, basis)
            if not mask:
                resolved.append((symbol, value))

        events = []
        for symbol, value in sorted(resolved):
            if symbol in self.state.missing:
                events.append(self._assign(symbol, value))
        events += self.peel()
        self._touched = set()
        return events


def _reduce(mask: int, rhs: BitBlock, basis: dict[int, tuple[int, BitBlock]]) -> tuple[int, BitBlock]:
    """Reduce a combination of inactive variables against an echelon basis"""
    while mask:
        top = mask.bit_length() - 1
        if top not in basis:
            break
        bmask, brhs = basis[top]
        mask ^= bmask
        rhs ^= brhs
    return mask, rhs


_DECODERS: dict[Variant, type[Decoder]] = {
    Variant.GE: GaussianDecoder,
    Variant.TRUNCATED_GE: TruncatedGaussianDecoder,
    Variant.PEELING: PeelingDecoder,
    Variant.INACTIVATION: InactivationDecoder,
}


def make_decoder(config: DecoderConfig) -> Decoder:
    return _DECODERS[config.variant](config)
