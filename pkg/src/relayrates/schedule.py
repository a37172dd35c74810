"""Nested-block encoding/decoding timetables and their causality checker.

Two variants are built symbolically, at block granularity (no codewords):

``thm1``
    block-by-block backward decoding; the source sends a fresh message
    ``m_b`` in every block ``b`` and trailing dummy messages restart each
    backward pass.
``thm2``
    B-blocks-by-B-blocks backward decoding; the source repeats ``m_f(b)``
    with ``f(b) = ceil(b / B)`` over ``B`` consecutive blocks and each
    decoding step unites those ``B`` blocks.

With ``M`` D-F relays a schedule spans ``B**(M+1)`` blocks and the node at
level ``k`` (``k = 2 .. M+2``) decodes at the end of blocks ``v * B**(k-1)``.
Message indices ``<= 0`` stand for the fixed dummy message ``1``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable

from .model import ResourceCapError

DEFAULT_BLOCK_CAP = 10**6


@dataclass(frozen=True)
class DecodeStep:
    """One typicality test inside a decode event.

    ``side`` lists the message indices the test treats as known;
    ``needs_compression`` is the compression index (from a later block) that
    must already be recovered in this pass.
    """

    blocks: tuple[int, ...]
    target: int | None
    side: tuple[int, ...]
    needs_compression: int | None = None
    recovers_compression: int | None = None


@dataclass(frozen=True)
class DecodeEvent:
    level: int
    block: int
    steps: tuple[DecodeStep, ...]
    decoded: tuple[int, ...]


@dataclass(frozen=True)
class CompressionIndex:
    """``l_b``: chosen at the end of block ``generated``, carried in ``used``."""

    index: int
    generated: int
    used: tuple[int, ...]


@dataclass(frozen=True)
class Schedule:
    variant: str
    M: int
    B: int
    L: int | None
    total_blocks: int
    slots: int
    dummy: frozenset[int]
    source_message: tuple[int, ...]
    # transmissions[b - 1][k - 1] = (fresh message, conditioning messages) of x_{pi(k), b}
    transmissions: tuple[tuple[tuple[int, tuple[int, ...]], ...], ...]
    events: tuple[DecodeEvent, ...]
    compression: tuple[CompressionIndex, ...]
    compression_rates: dict = field(default_factory=dict)

    def is_dummy(self, m: int) -> bool:
        return m <= 0 or m in self.dummy

    def period(self, level: int) -> int:
        return self.B ** (level - 1)

    def args(self, block: int) -> set[int]:
        """Every message index appearing in any D-F-side transmission of ``block``."""
        out = set()
        for fresh, cond in self.transmissions[block - 1]:
            out.add(fresh)
            out.update(cond)
        return out


# ----------------------------------------------------------------------------
# Dummy sets
# ----------------------------------------------------------------------------


def _nested_dummy_blocks(M: int, B: int) -> set[int]:
    """Blocks whose level-``u`` digit is the last one, for ``u = 1..M``:
    the union over ``u`` and ``v`` of ``[(vB - 1) B^u + 1 : v B^(u+1)]``."""
    out: set[int] = set()
    for u in range(1, M + 1):
        for v in range(1, B ** (M - u) + 1):
            out.update(range((v * B - 1) * B**u + 1, v * B ** (u + 1) + 1))
    return out


def dummy_messages_thm1(M: int, B: int, L: int) -> frozenset[int]:
    """Dummy messages for block-by-block decoding: the last ``L`` blocks of
    every group of ``B`` plus the nested tail blocks."""
    out = set()
    for w in range(1, B**M + 1):
        out.update(range(w * B - L + 1, w * B + 1))
    out |= _nested_dummy_blocks(M, B)
    return frozenset(out)


def _f(b: int, B: int) -> int:
    return -(-b // B) if b > 0 else 0


def dummy_messages_thm2(M: int, B: int) -> frozenset[int]:
    """Dummy messages ``m_f(b)`` for B-blocks-by-B-blocks decoding."""
    return frozenset(_f(b, B) for b in _nested_dummy_blocks(M, B))


def closed_form_fraction(variant: str, M: int, B: int, L: int | None = None) -> Fraction:
    """Share of message slots that carry information."""
    nested = Fraction(B - 1, B) ** M
    if variant == "thm1":
        return Fraction(B - L, B) * nested
    if variant == "thm2":
        return nested
    raise ValueError(f"unknown variant {variant!r}")


# ----------------------------------------------------------------------------
# Builders
# ----------------------------------------------------------------------------


def _check_params(M, B, cap):
    if M < 1:
        raise ValueError("need at least one D-F relay (M >= 1)")
    if B < 2:
        raise ValueError("B must be at least 2")
    if B ** (M + 1) > cap:
        raise ResourceCapError(f"B^(M+1) = {B ** (M + 1)} blocks exceeds cap {cap}")


def _compression_chain(total: int) -> tuple[CompressionIndex, ...]:
    # l_0 = 1 by convention; l_b is chosen after block b and sent in block b + 1
    return tuple(
        CompressionIndex(b, b, (b + 1,) if b + 1 <= total else ()) for b in range(0, total + 1)
    )


def _transmissions(M, B, total, msg):
    rows = []
    for b in range(1, total + 1):
        row = [(msg(b), tuple(msg(b - B**s) for s in range(1, M + 1)))]
        for k in range(2, M + 2):
            row.append((msg(b - B ** (k - 1)), tuple(msg(b - B**s) for s in range(k, M + 1))))
        rows.append(tuple(row))
    return tuple(rows)


def _offset(k: int, B: int) -> int:
    # level 2 decodes the source's fresh message directly; deeper levels lag
    # their upstream neighbour by B^(k-2) blocks
    return 0 if k == 2 else B ** (k - 2)


def build_schedule_thm1(M: int, B: int, L: int, *, cap: int = DEFAULT_BLOCK_CAP) -> Schedule:
    """Block-by-block backward decoding timetable with ``M`` D-F relays."""
    _check_params(M, B, cap)
    if not 1 <= L < B:
        raise ValueError("L must satisfy 1 <= L < B")
    total = B ** (M + 1)
    dummy = dummy_messages_thm1(M, B, L)
    proto = Schedule(
        "thm1", M, B, L, total, total, dummy,
        tuple(range(1, total + 1)),
        _transmissions(M, B, total, lambda m: m if m > 0 else 0),
        (), _compression_chain(total),
    )
    events = []
    for k in range(2, M + 3):
        period, off = B ** (k - 1), _offset(k, B)
        for v in range(1, total // period + 1):
            b = v * period
            start_blocks = tuple(range(b - L + 1, b + 1))
            side = set().union(*(proto.args(j) for j in start_blocks))
            steps = [DecodeStep(start_blocks, None, tuple(sorted(side)), None, b - L)]
            decoded = []
            for j in range(b - L, b - period, -1):
                target = j - off
                side = proto.args(j) - {target}
                steps.append(DecodeStep((j,), target, tuple(sorted(side)), j, j - 1))
                if not proto.is_dummy(target):
                    decoded.append(target)
            events.append(DecodeEvent(k, b, tuple(steps), tuple(decoded)))
    return replace(proto, events=tuple(sorted(events, key=lambda e: (e.block, e.level))))


def build_schedule_thm2(M: int, B: int, *, cap: int = DEFAULT_BLOCK_CAP) -> Schedule:
    """B-blocks-by-B-blocks backward decoding timetable with ``M`` D-F relays."""
    _check_params(M, B, cap)
    total = B ** (M + 1)
    dummy = dummy_messages_thm2(M, B)
    proto = Schedule(
        "thm2", M, B, None, total, B**M, dummy,
        tuple(_f(b, B) for b in range(1, total + 1)),
        _transmissions(M, B, total, lambda x: _f(x, B)),
        (), _compression_chain(total),
    )
    events = []
    for k in range(2, M + 3):
        period, per_event, off = B ** (k - 1), B ** (k - 2), _offset(k, B)
        for v in range(1, total // period + 1):
            steps, decoded = [], []
            for g in range(v * per_event, (v - 1) * per_event, -1):
                if proto.is_dummy(g):
                    continue
                window = tuple(range((g - 1) * B + 1 + off, g * B + off + 1))
                side = set().union(*(proto.args(j) for j in window)) - {g}
                steps.append(DecodeStep(window, g, tuple(sorted(side))))
                decoded.append(g)
            events.append(DecodeEvent(k, v * period, tuple(steps), tuple(decoded)))
    return replace(proto, events=tuple(sorted(events, key=lambda e: (e.block, e.level))))


def build_schedule(variant: str, M: int, B: int, L: int | None = None, **kw) -> Schedule:
    if variant == "thm1":
        return build_schedule_thm1(M, B, L if L is not None else 1, **kw)
    if variant == "thm2":
        return build_schedule_thm2(M, B, **kw)
    raise ValueError(f"unknown variant {variant!r}")


def effective_rate_fraction(s: Schedule) -> Fraction:
    """Non-dummy message slots over all slots, counted from the timetable."""
    informative = sum(1 for m in range(1, s.slots + 1) if not s.is_dummy(m))
    return Fraction(informative, s.slots)


# ----------------------------------------------------------------------------
# Verification
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleViolation:
    kind: str
    level: int | None
    block: int | None
    message: int | None
    detail: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "level": self.level,
            "block": self.block,
            "message": self.message,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ScheduleCheck:
    violation: ScheduleViolation | None = None

    @property
    def ok(self) -> bool:
        return self.violation is None

    @property
    def verdict(self) -> str:
        return "ok" if self.ok else "violation"


def _replay(s: Schedule):
    """Walk decode events in time order; yields the first violation or the
    per-level table ``message -> block by which it is known``."""
    known: dict[int, dict[int, int]] = {k: {} for k in range(2, s.M + 3)}
    uses: list[tuple[int, int, int]] = []  # (level, block, message) side-information uses
    for ev in sorted(s.events, key=lambda e: (e.block, e.level)):
        period = s.period(ev.level)
        recovered: set[int] = set()
        table = known.setdefault(ev.level, {})
        for step in ev.steps:
            late = [j for j in step.blocks if j > ev.block]
            if late:
                return ScheduleViolation(
                    "future-block", ev.level, ev.block, step.target,
                    f"decode at end of block {ev.block} uses block {late[0]}",
                ), None, None
            early = [j for j in step.blocks if j <= ev.block - period]
            if early:
                return ScheduleViolation(
                    "stale-block", ev.level, ev.block, step.target,
                    f"block {early[0]} lies outside the current window of {period} blocks",
                ), None, None
            for m in step.side:
                if not s.is_dummy(m) and m not in table:
                    return ScheduleViolation(
                        "unknown-side-message", ev.level, ev.block, m,
                        f"m{m} is needed as side information at block(s) {list(step.blocks)} "
                        f"but is neither dummy nor decoded at this node",
                    ), None, None
                uses.append((ev.level, ev.block, m))
            if step.needs_compression is not None and step.needs_compression not in recovered:
                return ScheduleViolation(
                    "compression-order", ev.level, ev.block, None,
                    f"l_{step.needs_compression} used before it was recovered",
                ), None, None
            if step.target is not None and step.target > 0:
                table.setdefault(step.target, ev.block)
            if step.recovers_compression is not None:
                recovered.add(step.recovers_compression)
    return None, known, uses


def verify_schedule(s: Schedule) -> ScheduleCheck:
    """Causality check of a schedule.

    Replays every decode event in backward order and confirms that each
    side message is dummy or already decoded at that node, that every D-F
    relay only forwards messages it decoded in an earlier block, that
    upstream levels decode a message no later than downstream levels rely on
    it, and that compression indices are generated before they are sent.
    """
    bad, known, uses = _replay(s)
    if bad:
        return ScheduleCheck(bad)

    for k in range(2, s.M + 3):
        expected = {v * s.period(k) for v in range(1, s.total_blocks // s.period(k) + 1)}
        got = sorted(e.block for e in s.events if e.level == k)
        if sorted(expected) != got:
            wrong = sorted(set(got) ^ expected)
            return ScheduleCheck(
                ScheduleViolation(
                    "event-timing", k, wrong[0] if wrong else None, None,
                    f"level {k} must decode exactly at multiples of {s.period(k)}",
                )
            )

    for k in range(2, s.M + 2):
        table = known[k]
        for b in range(1, s.total_blocks + 1):
            fresh, cond = s.transmissions[b - 1][k - 1]
            for m in (fresh, *cond):
                if s.is_dummy(m):
                    continue
                t = table.get(m)
                if t is None or t >= b:
                    return ScheduleCheck(
                        ScheduleViolation(
                            "forward-before-decode", k, b, m,
                            f"node pi({k}) sends m{m} in block {b} but decodes it "
                            + ("never" if t is None else f"at block {t}"),
                        )
                    )

    for level, block, m in uses:
        if s.is_dummy(m):
            continue
        for up in range(2, level):
            t = known[up].get(m)
            if t is None or t > block:
                return ScheduleCheck(
                    ScheduleViolation(
                        "level-order", level, block, m,
                        f"level {level} relies on m{m} before level {up} decoded it",
                    )
                )

    dest = s.M + 2
    for m in range(1, s.slots + 1):
        if not s.is_dummy(m) and m not in known[dest]:
            return ScheduleCheck(
                ScheduleViolation("undecoded", dest, None, m, f"destination never decodes m{m}")
            )

    for c in s.compression:
        if c.used and min(c.used) <= c.generated:
            return ScheduleCheck(
                ScheduleViolation(
                    "compression-before-generation", None, min(c.used), None,
                    f"l_{c.index} generated after block {c.generated} but used in block {min(c.used)}",
                )
            )
    return ScheduleCheck()


def first_decoded(s: Schedule) -> dict[int, dict[int, int]]:
    """``level -> {message: block of the decode event that recovers it}``."""
    bad, known, _ = _replay(s)
    if bad:
        raise ValueError(bad.detail)
    return known


def move_event(s: Schedule, level: int, from_block: int, to_block: int) -> Schedule:
    """Copy of ``s`` with one decode event re-timed (used to build counterexamples)."""
    events = []
    hit = False
    for e in s.events:
        if e.level == level and e.block == from_block and not hit:
            e = replace(e, block=to_block)
            hit = True
        events.append(e)
    if not hit:
        raise ValueError(f"no level-{level} event at block {from_block}")
    return replace(s, events=tuple(events))


def annotate_compression_rates(s: Schedule, net, assignment, inputs) -> Schedule:
    """Attach ``I(Y_i; Yhat_i | X_i)`` (bits) for every C-F relay of a model."""
    from .infocalc import Evaluator, X, Y, YH

    ev = Evaluator(net, assignment, inputs)
    rates = {i: ev.mi({Y(i)}, {YH(i)}, {X(i)}) for i in sorted(assignment.cf_set(net.n))}
    return replace(s, compression_rates=rates)


# ----------------------------------------------------------------------------
# Export
# ----------------------------------------------------------------------------


def _fmt(s: Schedule, m: int) -> str:
    return "1" if s.is_dummy(m) else f"m{m}"


def timeline_rows(s: Schedule) -> list[list[str]]:
    header = ["block [index]", "source message [index]", "dummy [bool]"]
    header += [f"x_pi({k}) args [message|conditioning]" for k in range(1, s.M + 2)]
    header += ["C-F input [compression index]", "decode events [level:messages]"]
    by_block: dict[int, list[DecodeEvent]] = {}
    for e in s.events:
        by_block.setdefault(e.block, []).append(e)
    rows = [header]
    for b in range(1, s.total_blocks + 1):
        m = s.source_message[b - 1]
        row = [str(b), _fmt(s, m), "1" if s.is_dummy(m) else "0"]
        for fresh, cond in s.transmissions[b - 1]:
            row.append(_fmt(s, fresh) + "|" + ",".join(_fmt(s, c) for c in cond))
        row.append(f"l{b - 1}")
        evs = sorted(by_block.get(b, []), key=lambda e: e.level)
        row.append(
            "; ".join(
                f"{e.level}:" + " ".join(f"m{d}" for d in sorted(e.decoded)) for e in evs
            )
        )
        rows.append(row)
    return rows


def timeline_csv(s: Schedule) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\r\n").writerows(timeline_rows(s))
    return buf.getvalue()


def schedule_grid(Ms: Iterable[int] = (1, 2, 3), Bs: Iterable[int] = (2, 3, 4)):
    """Every (variant, M, B, L) of the standard verification grid."""
    for M in Ms:
        for B in Bs:
            for L in range(1, B):
                yield "thm1", M, B, L
            yield "thm2", M, B, None
