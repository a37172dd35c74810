"""Achievable rates for multi-relay channels at a fixed input distribution.

Covers multi-level decode-and-forward, the compress-and-forward family
(successive decoding, noisy network coding over a relay subset, joint
compression-message decoding), the unified D-F/C-F rates under
block-by-block and B-blocks-by-B-blocks backward decoding, and an explicit
check that both unified rates coincide.

Every function evaluates a *fixed* input; maximizing over distributions is
the job of :mod:`relayrates.search`.

Numerical conventions: a strict inequality ``> 0`` is tested as ``> tol`` and
``>= 0`` as ``>= -tol`` (``tol = 1e-9`` by default), so the strict decodable
set is always contained in the non-strict one.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Iterator

from .infocalc import X, Y, Evaluator, xs, ys, yhs
from .model import (
    InputSpec,
    NetworkSpec,
    NodeConstraint,
    RateReport,
    RelayAssignment,
    ResourceCapError,
)

TOL = 1e-9
MAX_POOL_THM1 = 16
MAX_POOL_THM2 = 12


class UniquenessError(ArithmeticError):
    """The union of all qualifying decodable sets does not itself qualify."""


def subsets(pool: Iterable[int]) -> Iterator[frozenset[int]]:
    """All subsets by increasing size, lexicographic within a size."""
    items = sorted(pool)
    for r in range(len(items) + 1):
        for combo in combinations(items, r):
            yield frozenset(combo)


def _evaluator(net, assignment, inputs, evaluator):
    if evaluator is not None:
        return evaluator
    return Evaluator(net, assignment, inputs)


# ----------------------------------------------------------------------------
# Per-level decoding context
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SubsetContext:
    """Decoding context of node ``pi(k)``.

    ``cooperating`` = ``pi(1:k-1)`` (carry the fresh message), ``known`` =
    ``pi(k:M+1)`` (inputs known a priori), ``pool`` = candidate C-F relays.
    """

    receiver: int
    cooperating: frozenset[int]
    known: frozenset[int]
    pool: frozenset[int]

    @property
    def df_inputs(self) -> frozenset[int]:
        return self.cooperating | self.known


def level_context(assignment: RelayAssignment, k: int, n: int) -> SubsetContext:
    M = assignment.M
    if not 2 <= k <= M + 2:
        raise ValueError(f"level {k} outside 2..{M + 2}")
    return SubsetContext(
        receiver=assignment.pi(k),
        cooperating=assignment.pi_range(1, k - 1),
        known=assignment.pi_range(k, M + 1),
        pool=assignment.cf_set(n),
    )


def decodability(ev: Evaluator, ctx: SubsetContext, D: frozenset[int], S: frozenset[int]) -> float:
    """Joint-decodability functional for ``S`` inside candidate set ``D``.

    ``I(X_S; Yh_{D-S}, Y_r | X_df, X_{D-S}) - I(Y_S; Yh_S | X_df, X_D, Y_r, Yh_{D-S})``
    where ``X_df`` are all D-F-side inputs (source included).
    """
    rest = D - S
    first = ev.mi(xs(S), yhs(rest) | {Y(ctx.receiver)}, xs(ctx.df_inputs | rest))
    cost = ev.mi(ys(S), yhs(S), xs(ctx.df_inputs | D) | {Y(ctx.receiver)} | yhs(rest))
    return first - cost


def constraint_term(ev: Evaluator, ctx: SubsetContext, T: frozenset[int], S: frozenset[int]) -> float:
    """Inner term of the unified rate for decoding set ``T`` and cut ``S``.

    ``I(X_coop, X_S; Yh_{T-S}, Y_r | X_{T-S}, X_known)
    - I(Y_S; Yh_S | X_coop, X_known, X_T, Y_r, Yh_{T-S})``.
    """
    rest = T - S
    first = ev.mi(
        xs(ctx.cooperating | S),
        yhs(rest) | {Y(ctx.receiver)},
        xs(rest | ctx.known),
    )
    if not S:
        return first
    cost = ev.mi(ys(S), yhs(S), xs(ctx.df_inputs | T) | {Y(ctx.receiver)} | yhs(rest))
    return first - cost


def _qualifies(func: Callable, D: frozenset[int], strict: bool, tol: float) -> bool:
    for S in subsets(D):
        if not S:
            continue
        v = func(D, S)
        if strict and not v > tol:
            return False
        if not strict and not v >= -tol:
            return False
    return True


def largest_decodable_set(
    ctx: SubsetContext,
    ev: Evaluator,
    *,
    strict: bool = True,
    tol: float = TOL,
    max_pool: int = MAX_POOL_THM1,
) -> frozenset[int]:
    """Unique largest subset of the pool whose every nonempty ``S`` has a
    positive (``strict``) or nonnegative decodability functional.

    The union of all qualifying subsets is re-verified; if it fails,
    :class:`UniquenessError` signals a numerically degenerate instance.
    """
    if len(ctx.pool) > max_pool:
        raise ResourceCapError(f"candidate pool of {len(ctx.pool)} relays exceeds {max_pool}")
    cache: dict[tuple[frozenset[int], frozenset[int]], float] = {}

    def func(D, S):
        key = (D, S)
        if key not in cache:
            cache[key] = decodability(ev, ctx, D, S)
        return cache[key]

    union: frozenset[int] = frozenset()
    for D in subsets(ctx.pool):
        if D and _qualifies(func, D, strict, tol):
            union |= D
    if union and not _qualifies(func, union, strict, tol):
        raise UniquenessError(
            f"union {sorted(union)} of qualifying decodable sets does not qualify"
        )
    return union


def _inner_min(ev, ctx, T) -> tuple[float, frozenset[int]]:
    best, arg = None, frozenset()
    for S in subsets(T):
        v = constraint_term(ev, ctx, T, S)
        if best is None or v < best:
            best, arg = v, S
    return best, arg


def _report(per_node, assignment, method) -> RateReport:
    rate = min(c.value for c in per_node)
    return RateReport(rate=rate, per_node=tuple(per_node), assignment=assignment, method=method)


# ----------------------------------------------------------------------------
# Multi-level decode-and-forward
# ----------------------------------------------------------------------------


def df_multilevel_rate(
    net: NetworkSpec, assignment: RelayAssignment, inputs: InputSpec, *, evaluator=None
) -> RateReport:
    """``min_k I(X_{pi(1:k-1)}; Y_{pi(k)} | X_{pi(k:n+1)})`` with every relay decoding."""
    if assignment.df_set != net.relays:
        raise ValueError("multi-level D-F needs every relay in the D-F set")
    ev = _evaluator(net, assignment, inputs, evaluator)
    n = net.n
    per_node = []
    for k in range(2, n + 3):
        node = assignment.pi(k)
        v = ev.mi(
            xs(assignment.pi_range(1, k - 1)),
            {Y(node)},
            xs(assignment.pi_range(k, n + 1)),
        )
        per_node.append(NodeConstraint(k, node, frozenset(), frozenset(), v))
    return _report(per_node, assignment, "df_multilevel")


# ----------------------------------------------------------------------------
# Compress-and-forward family (no D-F relays)
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Infeasible:
    """Successive decoding fails: the compression-recovery condition is
    violated at ``violating_subset`` by ``slack`` bits (negative)."""

    violating_subset: frozenset[int]
    slack: float
    method: str = "cf_successive"

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "feasible": False,
            "violatingSubset": sorted(self.violating_subset),
            "slack": self.slack,
        }


def _cf_setup(net, inputs, evaluator):
    a = RelayAssignment.all_cf(net.n)
    return a, _evaluator(net, a, inputs, evaluator)


def cf_successive_rate(
    net: NetworkSpec, inputs: InputSpec, *, tol: float = TOL, evaluator=None
) -> RateReport | Infeasible:
    """Compression-message successive decoding.

    Rate ``I(X0; Yh_N, Y_d | X_N)`` provided, for every ``S`` in the relays,
    ``I(X_S; Yh_{N-S}, Y_d | X_{N-S}) - I(Y_S; Yh_S | X_N, Y_d, Yh_{N-S}) >= 0``.
    """
    a, ev = _cf_setup(net, inputs, evaluator)
    N = net.relays
    d = net.destination
    for S in subsets(N):
        if not S:
            continue
        rest = N - S
        slack = ev.mi(xs(S), yhs(rest) | {Y(d)}, xs(rest)) - ev.mi(
            ys(S), yhs(S), xs(N) | {Y(d)} | yhs(rest)
        )
        if slack < -tol:
            return Infeasible(S, slack)
    v = ev.mi({X(0)}, yhs(N) | {Y(d)}, xs(N))
    return _report([NodeConstraint(2, d, N, frozenset(), v)], a, "cf_successive")


def nnc_value(
    net: NetworkSpec, inputs: InputSpec, T: Iterable[int], *, evaluator=None
) -> tuple[float, frozenset[int]]:
    """Noisy-network-coding value restricted to relay subset ``T`` and its minimizing cut."""
    T = frozenset(T)
    if not T <= net.relays:
        raise ValueError(f"T={sorted(T)} is not a subset of the relays")
    _, ev = _cf_setup(net, inputs, evaluator)
    d = net.destination
    best, arg = None, frozenset()
    for S in subsets(T):
        rest = T - S
        v = ev.mi({X(0)} | xs(S), yhs(rest) | {Y(d)}, xs(rest))
        if S:
            v -= ev.mi(ys(S), yhs(S), {X(0)} | xs(T) | {Y(d)} | yhs(rest))
        if best is None or v < best:
            best, arg = v, S
    return best, arg


def nnc_rate_subset(net: NetworkSpec, inputs: InputSpec, T: Iterable[int], *, evaluator=None) -> float:
    """``min_{S in T} I(X0, X_S; Yh_{T-S}, Y_d | X_{T-S}) - I(Y_S; Yh_S | X0, X_T, Y_d, Yh_{T-S})``.

    Relays outside ``T`` stay in the joint law as noise.
    """
    return nnc_value(net, inputs, T, evaluator=evaluator)[0]


def cf_decodable_sets(
    net: NetworkSpec, inputs: InputSpec, *, tol: float = TOL, evaluator=None
) -> tuple[frozenset[int], frozenset[int]]:
    """Strict and non-strict jointly decodable relay sets at the destination."""
    a, ev = _cf_setup(net, inputs, evaluator)
    ctx = level_context(a, 2, net.n)
    return (
        largest_decodable_set(ctx, ev, strict=True, tol=tol),
        largest_decodable_set(ctx, ev, strict=False, tol=tol),
    )


def cf_joint_rate(net: NetworkSpec, inputs: InputSpec, *, tol: float = TOL, evaluator=None) -> RateReport:
    """Compression-message joint decoding with block-by-block backward decoding.

    Finds the jointly decodable set ``D`` (conditioning on ``X0``), then
    ``min_{S in D} I(X0, X_S; Yh_{D-S}, Y_d | X_{D-S}) - I(Y_S; Yh_S | X0, X_D, Y_d, Yh_{D-S})``.
    """
    a, ev = _cf_setup(net, inputs, evaluator)
    d = net.destination
    D = largest_decodable_set(level_context(a, 2, net.n), ev, strict=True, tol=tol)
    best, arg = None, frozenset()
    for S in subsets(D):
        rest = D - S
        gain = ev.mi({X(0)} | xs(S), yhs(rest) | {Y(d)}, xs(rest))
        cost = ev.mi(ys(S), yhs(S), {X(0)} | xs(D) | {Y(d)} | yhs(rest)) if S else 0.0
        v = gain - cost
        if best is None or v < best:
            best, arg = v, S
    return _report([NodeConstraint(2, d, D, arg, best)], a, "cf_joint")


# ----------------------------------------------------------------------------
# Unified D-F / C-F framework
# ----------------------------------------------------------------------------


def decodable_sets(
    net: NetworkSpec,
    assignment: RelayAssignment,
    inputs: InputSpec,
    *,
    strict: bool = True,
    tol: float = TOL,
    evaluator=None,
) -> dict[int, frozenset[int]]:
    """``D_k`` (or the non-strict ``D'_k``) for every level ``k``."""
    ev = _evaluator(net, assignment, inputs, evaluator)
    return {
        k: largest_decodable_set(level_context(assignment, k, net.n), ev, strict=strict, tol=tol)
        for k in assignment.levels()
    }


def unified_rate_thm1(
    net: NetworkSpec,
    assignment: RelayAssignment,
    inputs: InputSpec,
    *,
    tol: float = TOL,
    evaluator=None,
) -> RateReport:
    """Unified rate with block-by-block backward decoding.

    For each level ``k`` the node decodes jointly with the C-F relays in its
    strict decodable set ``D_k``; the rate is the smallest per-level
    ``min_{S in D_k}`` constraint.
    """
    pool = assignment.cf_set(net.n)
    if len(pool) > MAX_POOL_THM1:
        raise ResourceCapError(f"{len(pool)} C-F relays exceed the limit of {MAX_POOL_THM1}")
    ev = _evaluator(net, assignment, inputs, evaluator)
    per_node = []
    for k in assignment.levels():
        ctx = level_context(assignment, k, net.n)
        D = largest_decodable_set(ctx, ev, strict=True, tol=tol)
        v, S = _inner_min(ev, ctx, D)
        per_node.append(NodeConstraint(k, ctx.receiver, D, S, v))
    return _report(per_node, assignment, "unified_thm1")


def _all_T_values(ev, ctx):
    return {T: _inner_min(ev, ctx, T) for T in subsets(ctx.pool)}


def unified_rate_thm2(
    net: NetworkSpec,
    assignment: RelayAssignment,
    inputs: InputSpec,
    *,
    tol: float = TOL,
    evaluator=None,
) -> RateReport:
    """Unified rate with B-blocks-by-B-blocks backward decoding:
    ``min_k max_{T_k} min_{S in T_k}`` of the same inner term."""
    pool = assignment.cf_set(net.n)
    if len(pool) > MAX_POOL_THM2:
        raise ResourceCapError(f"{len(pool)} C-F relays exceed the limit of {MAX_POOL_THM2}")
    ev = _evaluator(net, assignment, inputs, evaluator)
    per_node = []
    for k in assignment.levels():
        ctx = level_context(assignment, k, net.n)
        values = _all_T_values(ev, ctx)
        best_T = max(values, key=lambda T: values[T][0])
        best = values[best_T][0]
        maximizers = tuple(T for T in values if values[T][0] >= best - tol)
        per_node.append(
            NodeConstraint(k, ctx.receiver, best_T, values[best_T][1], best, maximizers)
        )
    return _report(per_node, assignment, "unified_thm2")


@dataclass(frozen=True)
class LevelCheck:
    level: int
    node: int
    decodable_set: frozenset[int]
    value_at_decodable: float
    max_value: float
    maximizers: tuple[frozenset[int], ...]
    values: dict

    @property
    def ok(self) -> bool:
        return self.decodable_set in self.maximizers


@dataclass(frozen=True)
class Theorem3Report:
    levels: tuple[LevelCheck, ...]
    tol: float

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.levels)

    @property
    def max_gap(self) -> float:
        return max((c.max_value - c.value_at_decodable for c in self.levels), default=0.0)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "maxGap": self.max_gap,
            "levels": [
                {
                    "level": c.level,
                    "node": c.node,
                    "decodableSet": sorted(c.decodable_set),
                    "valueAtDecodable": c.value_at_decodable,
                    "maxValue": c.max_value,
                    "maximizers": [sorted(t) for t in c.maximizers],
                }
                for c in self.levels
            ],
        }


def verify_theorem3(
    net: NetworkSpec,
    assignment: RelayAssignment,
    inputs: InputSpec,
    *,
    tol: float = TOL,
    evaluator=None,
) -> Theorem3Report:
    """For each level, check that choosing ``T_k = D_k`` attains the maximum
    over all ``T_k`` within ``tol``; lists every maximizing ``T_k``."""
    pool = assignment.cf_set(net.n)
    if len(pool) > MAX_POOL_THM2:
        raise ResourceCapError(f"{len(pool)} C-F relays exceed the limit of {MAX_POOL_THM2}")
    ev = _evaluator(net, assignment, inputs, evaluator)
    checks = []
    for k in assignment.levels():
        ctx = level_context(assignment, k, net.n)
        D = largest_decodable_set(ctx, ev, strict=True, tol=tol)
        values = {T: v for T, (v, _) in _all_T_values(ev, ctx).items()}
        top = max(values.values())
        maximizers = tuple(T for T, v in values.items() if v >= top - tol)
        checks.append(LevelCheck(k, ctx.receiver, D, values[D], top, maximizers, values))
    return Theorem3Report(tuple(checks), tol)


# ----------------------------------------------------------------------------
# Single-relay baselines
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicRates:
    """Single-relay baselines. C-F entries are ``None`` when relay 1 decodes."""

    df: float
    cf_successive: float | None
    compression_cost: float | None
    relay_link: float | None
    cf_joint: float | None

    @property
    def cf_successive_feasible(self) -> bool | None:
        if self.compression_cost is None:
            return None
        return self.compression_cost <= self.relay_link + TOL

    def to_dict(self) -> dict:
        return {
            "df": self.df,
            "cfSuccessive": self.cf_successive,
            "cfSuccessiveFeasible": self.cf_successive_feasible,
            "compressionCost": self.compression_cost,
            "relayLink": self.relay_link,
            "cfJoint": self.cf_joint,
            "units": "bits/use",
        }


def classic_single_relay_rates(
    net: NetworkSpec, assignment: RelayAssignment, inputs: InputSpec, *, evaluator=None
) -> ClassicRates:
    """Single-relay D-F and C-F baselines at the given input.

    * D-F: ``min{I(X0; Y1 | X1), I(X0, X1; Y2)}``.
    * C-F successive: ``I(X0; Yh1, Y2 | X1)`` subject to
      ``I(Y1; Yh1 | X1, Y2) <= I(X1; Y2)``.
    * C-F joint: ``I(X0; Yh1, Y2 | X1) - max{0, I(Y1; Yh1 | X1, Y2) - I(X1; Y2)}``.

    The C-F values need relay 1 to be a C-F relay in ``assignment``.
    """
    if net.n != 1:
        raise ValueError("single-relay baselines need n = 1")
    ev = _evaluator(net, assignment, inputs, evaluator)
    df = min(ev.mi({"X0"}, {"Y1"}, {"X1"}), ev.mi({"X0", "X1"}, {"Y2"}))
    if 1 in assignment.df_set:
        return ClassicRates(df, None, None, None, None)
    succ = ev.mi({"X0"}, {"Yh1", "Y2"}, {"X1"})
    cost = ev.mi({"Y1"}, {"Yh1"}, {"X1", "Y2"})
    link = ev.mi({"X1"}, {"Y2"})
    joint = succ - max(0.0, cost - link)
    return ClassicRates(df, succ, cost, link, joint)
