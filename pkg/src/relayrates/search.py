"""Strategy search: which relays decode, in what order, with which inputs.

The outer maximization over input distributions is realized as a finite
search. Gaussian inputs are parameterized so every grid point is valid by
construction; discrete networks are searched over an explicit candidate list.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .infocalc import Evaluator
from .model import (
    DiscreteInput,
    GaussianInput,
    InputSpec,
    NetworkSpec,
    RateReport,
    RelayAssignment,
    ResourceCapError,
    validate,
)
from .rates import (
    Infeasible,
    cf_joint_rate,
    cf_successive_rate,
    df_multilevel_rate,
    unified_rate_thm1,
    unified_rate_thm2,
)

log = logging.getLogger(__name__)

OBJECTIVES = ("thm1", "thm2", "cf_successive", "cf_joint", "df")
MODES = ("grid", "coordinate")


class InfeasibleGridError(ValueError):
    """No grid point produced a feasible rate."""


@dataclass(frozen=True)
class SearchConfig:
    """Search space and optimizer settings.

    ``rho_grid`` holds cooperation coefficients: at level ``k`` the D-F node
    ``pi(k)`` shares a fraction ``rho**2`` of its power with the signals of
    the nodes downstream of it. ``df_power_grid`` and ``cf_power_grid`` are
    fractions of each node's power budget; ``quant_grid`` lists compression
    noise variances.
    """

    max_relays: int = 8
    rho_grid: tuple[float, ...] = tuple(round(0.1 * i, 10) for i in range(10))
    df_power_grid: tuple[float, ...] = (1.0,)
    cf_power_grid: tuple[float, ...] = (0.0, 0.5, 1.0)
    quant_grid: tuple[float, ...] = (0.1, 0.3, 1.0, 3.0, 10.0)
    discrete_candidates: tuple[InputSpec, ...] = ()
    mode: str = "grid"
    objective: str = "thm1"
    sweeps: int = 5
    rel_stop: float = 1e-6
    max_points: int = 200_000

    def __post_init__(self):
        problems = []
        for name in ("rho_grid", "df_power_grid", "cf_power_grid", "quant_grid"):
            if not getattr(self, name):
                problems.append(f"{name} is empty")
        if any(abs(r) > 1 for r in self.rho_grid):
            problems.append("rho_grid values must satisfy |rho| <= 1")
        if any(not 0 <= p <= 1 for p in self.df_power_grid + self.cf_power_grid):
            problems.append("power fractions must lie in [0, 1]")
        if any(q <= 0 for q in self.quant_grid):
            problems.append("quant_grid values must be > 0")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}")
        if self.objective not in OBJECTIVES:
            problems.append(f"objective must be one of {OBJECTIVES}")
        if self.sweeps < 1 or self.max_relays < 0 or self.max_points < 1:
            problems.append("sweeps, max_relays and max_points must be positive")
        if problems:
            raise ValueError("; ".join(problems))


# ----------------------------------------------------------------------------
# Assignments
# ----------------------------------------------------------------------------


def enumerate_assignments(n: int, max_relays: int = 8) -> list[RelayAssignment]:
    """Every D-F set with every decoding order, by ``|M|`` then ``pi``."""
    if n > max_relays:
        raise ResourceCapError(f"n = {n} exceeds the enumeration bound {max_relays}")
    out = []
    for m in range(n + 1):
        for perm in itertools.permutations(range(1, n + 1), m):
            out.append(RelayAssignment(frozenset(perm), (0, *perm, n + 1)))
    out.sort(key=_tiebreak)
    return out


def _tiebreak(a: RelayAssignment):
    return (a.M, a.order)


def supports(objective: str, net: NetworkSpec, a: RelayAssignment) -> bool:
    if objective in ("cf_successive", "cf_joint"):
        return a.M == 0
    if objective == "df":
        return a.df_set == net.relays
    return True


# ----------------------------------------------------------------------------
# Gaussian parameterization
# ----------------------------------------------------------------------------


def gaussian_axes(net, a: RelayAssignment, cfg: SearchConfig) -> dict[str, tuple[float, ...]]:
    """Named search coordinates and their grids for one assignment."""
    axes: dict[str, tuple[float, ...]] = {}
    for k in range(1, a.M + 1):
        axes[f"rho[{k}]"] = tuple(cfg.rho_grid)
    for node in (0, *a.df_sorted()):
        if len(cfg.df_power_grid) > 1 or cfg.df_power_grid[0] != 1.0:
            axes[f"dfPower[{node}]"] = tuple(cfg.df_power_grid)
    for i in sorted(a.cf_set(net.n)):
        axes[f"cfPower[{i}]"] = tuple(cfg.cf_power_grid)
        axes[f"quantNoise[{i}]"] = tuple(cfg.quant_grid)
    return axes


def gaussian_input(net, a: RelayAssignment, params: dict[str, float]) -> GaussianInput:
    """Build a valid Gaussian input from named parameters.

    Uses independent unit-variance components ``U_1 .. U_{M+1}``. Node
    ``pi(k)`` puts ``1 - rho_k**2`` of its power on ``U_k`` and spreads
    ``rho_k**2`` evenly over ``U_{k+1} .. U_{M+1}``, so the covariance is PSD
    by construction. For one D-F relay ``rho_1`` is the correlation between
    the source and relay inputs.
    """
    M = a.M
    A = np.zeros((M + 1, M + 1))
    for k in range(1, M + 2):
        node = a.pi(k)
        rho = params.get(f"rho[{k}]", 0.0) if k <= M else 0.0
        A[k - 1, k - 1] = math.sqrt(1.0 - rho * rho)
        if k <= M:
            A[k - 1, k:] = rho / math.sqrt(M + 1 - k)
        A[k - 1] *= math.sqrt(params.get(f"dfPower[{node}]", 1.0) * net.power[node])
    cov_pi = A @ A.T
    # reorder from decoding order to ascending node index
    nodes = [a.pi(k) for k in range(1, M + 2)]
    idx = [nodes.index(v) for v in (0, *a.df_sorted())]
    cov = cov_pi[np.ix_(idx, idx)]
    cf = sorted(a.cf_set(net.n))
    return GaussianInput(
        cov,
        {i: params[f"cfPower[{i}]"] * net.power[i] for i in cf},
        {i: params[f"quantNoise[{i}]"] for i in cf},
    )


# ----------------------------------------------------------------------------
# Discrete candidates
# ----------------------------------------------------------------------------


def default_discrete_candidates(net, a: RelayAssignment) -> list[InputSpec]:
    """Uniform inputs, with D-F inputs independent of or equal to the source
    input, and each C-F relay either forwarding ``Y_i`` verbatim or nothing."""
    df = a.df_sorted()
    cf = sorted(a.cf_set(net.n))
    sx = net.x_sizes
    p_x0 = np.full(sx[0], 1.0 / sx[0])
    df_options = [None]
    if df:
        shape = (sx[0],) + tuple(sx[i] for i in df)
        indep = np.full(shape, 1.0 / int(np.prod(shape[1:])))
        df_options = [indep]
        if all(s == sx[0] for s in shape):
            eq = np.zeros(shape)
            for v in range(sx[0]):
                eq[(v,) * len(shape)] = 1.0
            df_options.append(eq)
    p_xcf = {i: np.full(sx[i], 1.0 / sx[i]) for i in cf}

    def compress(i, kind):
        ny, nx = net.y_sizes[i - 1], sx[i]
        if kind == "identity":
            t = np.zeros((ny, nx, ny))
            for y in range(ny):
                t[y, :, y] = 1.0
            return t
        return np.ones((ny, nx, 1))

    out = []
    for p_xdf in df_options:
        for kinds in itertools.product(("identity", "constant"), repeat=len(cf)):
            p_yhat = {i: compress(i, kd) for i, kd in zip(cf, kinds)}
            out.append(InputSpec.single(DiscreteInput(p_x0, p_xdf, p_xcf, p_yhat)))
    return out


# ----------------------------------------------------------------------------
# Optimization
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    report: RateReport
    params: dict
    evaluated: int
    infeasible: tuple[tuple[dict, str], ...] = field(default_factory=tuple)

    @property
    def rate(self) -> float:
        return self.report.rate


def evaluate(net, a: RelayAssignment, inputs: InputSpec, objective: str) -> RateReport | Infeasible:
    report = validate(net, a, inputs)
    if not report.ok:
        raise ValueError("; ".join(report.messages()))
    ev = Evaluator(net, a, inputs, validate=False)
    if objective == "thm1":
        return unified_rate_thm1(net, a, inputs, evaluator=ev)
    if objective == "thm2":
        return unified_rate_thm2(net, a, inputs, evaluator=ev)
    if objective == "cf_successive":
        return cf_successive_rate(net, inputs, evaluator=ev)
    if objective == "cf_joint":
        return cf_joint_rate(net, inputs, evaluator=ev)
    return df_multilevel_rate(net, a, inputs, evaluator=ev)


class _Tracker:
    def __init__(self, net, a, objective, build):
        self.net, self.a, self.objective, self.build = net, a, objective, build
        self.best: tuple[RateReport, dict] | None = None
        self.evaluated = 0
        self.infeasible: list[tuple[dict, str]] = []
        self.cache: dict[tuple, float | None] = {}

    def __call__(self, params: dict) -> float | None:
        key = tuple(sorted(params.items()))
        if key in self.cache:
            return self.cache[key]
        self.evaluated += 1
        try:
            res = evaluate(self.net, self.a, self.build(params), self.objective)
            reason = None
            if isinstance(res, Infeasible):
                reason = (
                    f"compression recovery fails at S={sorted(res.violating_subset)} "
                    f"(slack {res.slack:.3g})"
                )
        except ValueError as exc:
            reason = f"invalid input: {exc}"
        if reason is not None:
            log.info("infeasible point %s: %s", params, reason)
            self.infeasible.append((dict(params), reason))
            self.cache[key] = None
            return None
        if self.best is None or res.rate > self.best[0].rate:
            self.best = (res, dict(params))
        self.cache[key] = res.rate
        return res.rate

    def result(self) -> SearchResult:
        if self.best is None:
            raise InfeasibleGridError(
                f"all {self.evaluated} grid points are infeasible for order {self.a.order}"
            )
        return SearchResult(self.best[0], self.best[1], self.evaluated, tuple(self.infeasible))


def _grid(track, axes, cap):
    names = list(axes)
    size = math.prod(len(axes[nm]) for nm in names)
    if size > cap:
        raise ResourceCapError(f"grid of {size} points exceeds max_points = {cap}")
    for values in itertools.product(*(axes[nm] for nm in names)):
        track(dict(zip(names, values)))


def _refine(grid: tuple[float, ...], value: float, lo: float, hi: float) -> tuple[float, ...]:
    pts = sorted(set(grid))
    i = pts.index(value)
    extra = []
    if i > 0:
        extra.append(0.5 * (pts[i - 1] + value))
    if i + 1 < len(pts):
        extra.append(0.5 * (value + pts[i + 1]))
    return tuple(sorted(set(pts) | {min(max(x, lo), hi) for x in extra}))


_DOMAINS = {"rho": (-1.0, 1.0), "dfPower": (0.0, 1.0), "cfPower": (0.0, 1.0), "quantNoise": (1e-12, math.inf)}


def _coordinate(track, axes, cfg):
    """Coordinate ascent over the grids; a sweep without improvement halves
    the grid spacing around the current point."""
    names = list(axes)
    grids = {nm: tuple(sorted(set(axes[nm]))) for nm in names}
    point = {nm: grids[nm][len(grids[nm]) // 2] for nm in names}
    current = track(point)
    for _ in range(cfg.sweeps):
        before = current
        for nm in names:
            for v in grids[nm]:
                trial = dict(point, **{nm: v})
                r = track(trial)
                if r is not None and (current is None or r > current):
                    point, current = trial, r
        improved = current is not None and (
            before is None or current - before > cfg.rel_stop * max(abs(before), 1e-12)
        )
        if not improved:
            if current is None:
                break
            for nm in names:
                lo, hi = _DOMAINS[nm.split("[")[0]]
                grids[nm] = _refine(grids[nm], point[nm], lo, hi)


def optimize_params(net, assignment: RelayAssignment, cfg: SearchConfig = SearchConfig()) -> SearchResult:
    """Best rate over the configured input family for one assignment."""
    if not supports(cfg.objective, net, assignment):
        raise ValueError(f"objective {cfg.objective!r} does not apply to order {assignment.order}")
    if net.kind == "gaussian":
        track = _Tracker(
            net, assignment, cfg.objective,
            lambda p: InputSpec.single(gaussian_input(net, assignment, p)),
        )
        axes = gaussian_axes(net, assignment, cfg)
        if cfg.mode == "grid" or not axes:
            _grid(track, axes, cfg.max_points)
        else:
            _coordinate(track, axes, cfg)
    else:
        cands = list(cfg.discrete_candidates) or default_discrete_candidates(net, assignment)
        if len(cands) > cfg.max_points:
            raise ResourceCapError(f"{len(cands)} candidates exceed max_points = {cfg.max_points}")
        track = _Tracker(net, assignment, cfg.objective, lambda p: cands[p["candidate"]])
        for i in range(len(cands)):
            track({"candidate": i})
    return track.result()


@dataclass(frozen=True)
class RankedStrategy:
    assignment: RelayAssignment
    rate: float
    result: SearchResult


def rank_strategies(net, cfg: SearchConfig = SearchConfig(), *, threads: int = 1) -> list[RankedStrategy]:
    """Optimize every applicable assignment and sort by rate (descending).

    Rates equal to 12 significant digits count as ties and are ordered by
    ``(|M|, pi)``, which keeps the output independent of evaluation order.
    """
    cands = [a for a in enumerate_assignments(net.n, cfg.max_relays) if supports(cfg.objective, net, a)]

    def run(a):
        return RankedStrategy(a, (res := optimize_params(net, a, cfg)).rate, res)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            ranked = list(pool.map(run, cands))
    else:
        ranked = [run(a) for a in cands]
    ranked.sort(key=lambda r: (-float(f"{r.rate:.12g}"), *_tiebreak(r.assignment)))
    return ranked


def fmt(x: float) -> str:
    return f"{x:.12g}"


def ranking_rows(ranked: list[RankedStrategy]) -> list[list[str]]:
    rows = [[
        "rank [index]", "df set [nodes]", "order [nodes]", "parameters",
        "rate [bits/use]", "binding level [index]", "binding node [index]",
        "binding subset [nodes]",
    ]]
    for r, s in enumerate(ranked, 1):
        b = s.result.report.binding
        params = ";".join(f"{k}={fmt(v) if isinstance(v, float) else v}" for k, v in s.result.params.items())
        rows.append([
            str(r),
            " ".join(map(str, sorted(s.assignment.df_set))),
            " ".join(map(str, s.assignment.order)),
            params,
            fmt(s.rate),
            str(b.level),
            str(b.node),
            " ".join(map(str, sorted(b.binding_subset))),
        ])
    return rows


def ranking_csv(ranked: list[RankedStrategy]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\r\n").writerows(ranking_rows(ranked))
    return buf.getvalue()
