"""Networks, relay assignments and input distributions.

Node indices follow one convention throughout the package: ``0`` is the
source, ``1..n`` are relays and ``n + 1`` is the destination.

Every structure here is treated as immutable once built. :func:`validate`
inspects a (network, assignment, input) triple and reports every broken
invariant with a path to the offending field; :func:`check` raises
:class:`ValidationError` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

PMF_TOL = 1e-12
PSD_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when a network/assignment/input triple breaks an invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.path}: {v.message}" for v in self.violations)
        super().__init__(lines or "invalid instance")


class ResourceCapError(RuntimeError):
    """A configured size cap (state space, subset pool, block count) was exceeded."""


# ----------------------------------------------------------------------------
# Networks
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteNetwork:
    """Discrete memoryless relay network.

    ``channel`` has shape ``x_sizes + y_sizes`` and holds
    ``p(y_1, ..., y_{n+1} | x_0, ..., x_n)``; ``y_sizes[j - 1]`` is the
    alphabet of receiver ``j``.
    """

    n: int
    x_sizes: tuple[int, ...]
    y_sizes: tuple[int, ...]
    channel: np.ndarray
    kind: str = field(default="discrete", init=False)

    def __post_init__(self):
        object.__setattr__(self, "x_sizes", tuple(int(s) for s in self.x_sizes))
        object.__setattr__(self, "y_sizes", tuple(int(s) for s in self.y_sizes))
        object.__setattr__(self, "channel", np.asarray(self.channel, dtype=float))

    @property
    def relays(self) -> frozenset[int]:
        return frozenset(range(1, self.n + 1))

    @property
    def destination(self) -> int:
        return self.n + 1


@dataclass(frozen=True, eq=False)
class GaussianNetwork:
    """Additive white Gaussian noise relay network.

    Receiver ``j`` observes ``Y_j = sum_i gains[i, j - 1] * X_i + Z_j`` with
    ``Z_j ~ N(0, noise[j - 1])`` independent across receivers. ``power[i]``
    is the budget of transmitter ``i``.
    """

    n: int
    gains: np.ndarray
    noise: tuple[float, ...]
    power: tuple[float, ...]
    kind: str = field(default="gaussian", init=False)

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=float))
        object.__setattr__(self, "noise", tuple(float(v) for v in self.noise))
        object.__setattr__(self, "power", tuple(float(v) for v in self.power))

    @property
    def relays(self) -> frozenset[int]:
        return frozenset(range(1, self.n + 1))

    @property
    def destination(self) -> int:
        return self.n + 1

    def gain(self, tx: int, rx: int) -> float:
        return float(self.gains[tx, rx - 1])


NetworkSpec = Union[DiscreteNetwork, GaussianNetwork]


# ----------------------------------------------------------------------------
# Relay assignment
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RelayAssignment:
    """D-F relay set and the decoding order ``pi`` over source, D-F relays, destination."""

    df_set: frozenset[int]
    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "df_set", frozenset(int(i) for i in self.df_set))
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))

    @classmethod
    def from_order(cls, order: Sequence[int]) -> "RelayAssignment":
        order = tuple(order)
        return cls(frozenset(order[1:-1]), order)

    @classmethod
    def all_cf(cls, n: int) -> "RelayAssignment":
        return cls(frozenset(), (0, n + 1))

    @classmethod
    def all_df(cls, n: int) -> "RelayAssignment":
        return cls(frozenset(range(1, n + 1)), tuple(range(0, n + 2)))

    @property
    def M(self) -> int:
        return len(self.df_set)

    def pi(self, k: int) -> int:
        """Node at 1-based position ``k`` of the order."""
        return self.order[k - 1]

    def pi_range(self, k1: int, k2: int) -> frozenset[int]:
        """``{pi(k1), ..., pi(k2)}``; empty when ``k1 > k2``."""
        if k1 > k2:
            return frozenset()
        return frozenset(self.order[k1 - 1 : k2])

    def cf_set(self, n: int) -> frozenset[int]:
        return frozenset(range(1, n + 1)) - self.df_set

    def levels(self) -> range:
        """Decoding levels ``k = 2 .. M + 2``."""
        return range(2, self.M + 3)

    def df_sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.df_set))


# ----------------------------------------------------------------------------
# Input distributions
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteInput:
    """One factorized input ``p(x0) p(x_M | x0) prod_i p(x_i) p(yhat_i | y_i, x_i)``.

    ``p_xdf`` has shape ``(|X0|, |X_m1|, ..., |X_mM|)`` with D-F relays in
    ascending index order; it may be ``None`` when there is no D-F relay.
    ``p_yhat[i]`` has shape ``(|Y_i|, |X_i|, |Yhat_i|)``.
    """

    p_x0: np.ndarray
    p_xdf: np.ndarray | None
    p_xcf: Mapping[int, np.ndarray]
    p_yhat: Mapping[int, np.ndarray]
    kind: str = field(default="discrete", init=False)

    def __post_init__(self):
        object.__setattr__(self, "p_x0", np.asarray(self.p_x0, dtype=float))
        if self.p_xdf is not None:
            object.__setattr__(self, "p_xdf", np.asarray(self.p_xdf, dtype=float))
        object.__setattr__(
            self, "p_xcf", {int(k): np.asarray(v, dtype=float) for k, v in self.p_xcf.items()}
        )
        object.__setattr__(
            self, "p_yhat", {int(k): np.asarray(v, dtype=float) for k, v in self.p_yhat.items()}
        )


@dataclass(frozen=True, eq=False)
class GaussianInput:
    """Gaussian input: joint covariance over ``{0} + M`` (ascending index order),
    independent C-F relay input variances, and compression noise variances
    (``Yhat_i = Y_i + Zhat_i`` with ``Zhat_i ~ N(0, quant_noise[i])``)."""

    cov_df: np.ndarray
    cf_power: Mapping[int, float]
    quant_noise: Mapping[int, float]
    kind: str = field(default="gaussian", init=False)

    def __post_init__(self):
        object.__setattr__(self, "cov_df", np.atleast_2d(np.asarray(self.cov_df, dtype=float)))
        object.__setattr__(self, "cf_power", {int(k): float(v) for k, v in self.cf_power.items()})
        object.__setattr__(
            self, "quant_noise", {int(k): float(v) for k, v in self.quant_noise.items()}
        )


FactorizedInput = Union[DiscreteInput, GaussianInput]


@dataclass(frozen=True, eq=False)
class InputSpec:
    """Weighted mixture of factorized inputs; more than one component realizes
    a time-sharing variable ``Q``."""

    components: tuple[tuple[float, FactorizedInput], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "components", tuple((float(w), f) for w, f in self.components)
        )

    @classmethod
    def single(cls, factor: FactorizedInput) -> "InputSpec":
        return cls(((1.0, factor),))


# ----------------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class NodeConstraint:
    """Rate constraint at decoding level ``k`` (node ``pi(k)``).

    ``decoding_set`` is ``D_k`` for block-by-block decoding or the chosen
    ``T_k`` for B-blocks-by-B-blocks decoding; ``binding_subset`` is the
    ``S`` achieving the inner minimum.
    """

    level: int
    node: int
    decoding_set: frozenset[int]
    binding_subset: frozenset[int]
    value: float
    maximizers: tuple[frozenset[int], ...] = ()

    def to_dict(self) -> dict:
        out = {
            "level": self.level,
            "node": self.node,
            "decodingSet": sorted(self.decoding_set),
            "bindingSubset": sorted(self.binding_subset),
            "value": self.value,
        }
        if self.maximizers:
            out["maximizers"] = [sorted(t) for t in self.maximizers]
        return out


@dataclass(frozen=True)
class RateReport:
    rate: float
    per_node: tuple[NodeConstraint, ...]
    assignment: RelayAssignment
    method: str

    @property
    def binding(self) -> NodeConstraint:
        return min(self.per_node, key=lambda c: c.value)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "rate": self.rate,
            "units": "bits/use",
            "assignment": {
                "dfSet": sorted(self.assignment.df_set),
                "order": list(self.assignment.order),
            },
            "perNode": [c.to_dict() for c in self.per_node],
        }


# ----------------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def messages(self) -> list[str]:
        return [v.message for v in self.violations]


def _slices_normalized(table: np.ndarray, n_lead: int) -> bool:
    """True when summing ``table`` over all axes after ``n_lead`` gives 1 everywhere."""
    axes = tuple(range(n_lead, table.ndim))
    sums = table.sum(axis=axes) if axes else table
    return bool(np.all(np.abs(sums - 1.0) <= PMF_TOL))


def _check_pmf(out, path, table, shape, n_lead):
    if table.shape != tuple(shape):
        out.append(Violation(path, f"shape {table.shape} != expected {tuple(shape)}"))
        return
    if not np.all(np.isfinite(table)) or np.any(table < 0):
        out.append(Violation(path, "probabilities must be finite and nonnegative"))
        return
    if not _slices_normalized(table, n_lead):
        out.append(Violation(path, "pmf slice does not sum to 1"))


def _validate_network(net, out):
    if not isinstance(net.n, int) or net.n < 0:
        out.append(Violation("network.n", "relay count must be a nonnegative integer"))
        return
    n = net.n
    if isinstance(net, DiscreteNetwork):
        if len(net.x_sizes) != n + 1:
            out.append(Violation("network.xSizes", f"expected {n + 1} input alphabets"))
        if len(net.y_sizes) != n + 1:
            out.append(Violation("network.ySizes", f"expected {n + 1} output alphabets"))
        if any(s < 1 for s in net.x_sizes + net.y_sizes):
            out.append(Violation("network", "alphabet sizes must be >= 1"))
        if out:
            return
        _check_pmf(out, "network.channel", net.channel, net.x_sizes + net.y_sizes, n + 1)
    elif isinstance(net, GaussianNetwork):
        if net.gains.shape != (n + 1, n + 1):
            out.append(Violation("network.gains", f"expected shape {(n + 1, n + 1)}"))
        elif not np.all(np.isfinite(net.gains)):
            out.append(Violation("network.gains", "gains must be finite"))
        if len(net.noise) != n + 1:
            out.append(Violation("network.noise", f"expected {n + 1} noise variances"))
        elif any(not (v > 0 and math.isfinite(v)) for v in net.noise):
            out.append(Violation("network.noise", "noise variances must be positive"))
        if len(net.power) != n + 1:
            out.append(Violation("network.power", f"expected {n + 1} power budgets"))
        elif any(not (v > 0 and math.isfinite(v)) for v in net.power):
            out.append(Violation("network.power", "power budgets must be positive"))
    else:
        out.append(Violation("network", f"unknown network type {type(net).__name__}"))


def _validate_assignment(n, a, out):
    relays = set(range(1, n + 1))
    if not set(a.df_set) <= relays:
        out.append(Violation("assignment.dfSet", "D-F set must be a subset of the relays"))
    order = a.order
    if not order or order[0] != 0:
        out.append(Violation("assignment.order", "order must start at source"))
    if not order or order[-1] != n + 1:
        out.append(Violation("assignment.order", "order must end at destination"))
    expected = {0, n + 1} | set(a.df_set)
    if len(order) != len(set(order)) or set(order) != expected or len(order) != a.M + 2:
        out.append(
            Violation("assignment.order", "order must be a permutation of source, D-F set, destination")
        )


def _validate_discrete_factor(net, a, f, path, out):
    n = net.n
    df = a.df_sorted()
    cf = sorted(a.cf_set(n))
    _check_pmf(out, f"{path}.px0", f.p_x0, (net.x_sizes[0],), 0)
    if df:
        if f.p_xdf is None:
            out.append(Violation(f"{path}.pxDf", "missing joint pmf of D-F relay inputs"))
        else:
            shape = (net.x_sizes[0],) + tuple(net.x_sizes[i] for i in df)
            _check_pmf(out, f"{path}.pxDf", f.p_xdf, shape, 1)
    elif f.p_xdf is not None and f.p_xdf.size not in (0, net.x_sizes[0]):
        out.append(Violation(f"{path}.pxDf", "given although there are no D-F relays"))
    if sorted(f.p_xcf) != cf:
        out.append(Violation(f"{path}.pxCf", f"keys must be the C-F relays {cf}"))
    if sorted(f.p_yhat) != cf:
        out.append(Violation(f"{path}.pYhat", f"keys must be the C-F relays {cf}"))
    for i in cf:
        if i in f.p_xcf:
            _check_pmf(out, f"{path}.pxCf.{i}", f.p_xcf[i], (net.x_sizes[i],), 0)
        if i in f.p_yhat:
            t = f.p_yhat[i]
            if t.ndim != 3 or t.shape[:2] != (net.y_sizes[i - 1], net.x_sizes[i]) or t.shape[2] < 1:
                out.append(
                    Violation(
                        f"{path}.pYhat.{i}",
                        f"shape {t.shape} must be (|Y_{i}|, |X_{i}|, |Yhat_{i}|)",
                    )
                )
            else:
                _check_pmf(out, f"{path}.pYhat.{i}", t, t.shape, 2)


def _validate_gaussian_factor(net, a, f, path, out):
    n = net.n
    nodes = (0,) + a.df_sorted()
    cf = sorted(a.cf_set(n))
    cov = f.cov_df
    if cov.shape != (len(nodes), len(nodes)):
        out.append(Violation(f"{path}.cov", f"expected shape {(len(nodes), len(nodes))}"))
    elif not np.all(np.isfinite(cov)):
        out.append(Violation(f"{path}.cov", "input covariance must be finite"))
    else:
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            out.append(Violation(f"{path}.cov", "input covariance not symmetric"))
        sym = (cov + cov.T) / 2
        eig = np.linalg.eigvalsh(sym)
        scale = max(1.0, float(np.max(np.abs(eig))))
        if eig[0] < -PSD_TOL * scale:
            out.append(Violation(f"{path}.cov", "input covariance not PSD"))
        for pos, node in enumerate(nodes):
            if cov[pos, pos] > net.power[node] * (1 + 1e-12):
                out.append(
                    Violation(f"{path}.cov", f"variance of X{node} exceeds its power budget")
                )
    if sorted(f.cf_power) != cf:
        out.append(Violation(f"{path}.cfPower", f"keys must be the C-F relays {cf}"))
    if sorted(f.quant_noise) != cf:
        out.append(Violation(f"{path}.quantNoise", f"keys must be the C-F relays {cf}"))
    for i, p in f.cf_power.items():
        if i in cf and not (0 <= p <= net.power[i] * (1 + 1e-12)):
            out.append(Violation(f"{path}.cfPower.{i}", "input variance must lie in [0, budget]"))
    for i, s in f.quant_noise.items():
        if not (s > 0 and math.isfinite(s)):
            out.append(Violation(f"{path}.quantNoise.{i}", "compression noise variance must be positive"))


def validate(net: NetworkSpec, assignment: RelayAssignment, inputs: InputSpec) -> ValidationReport:
    """Check every structural invariant; never raises."""
    out: list[Violation] = []
    _validate_network(net, out)
    if out:
        return ValidationReport(tuple(out))
    _validate_assignment(net.n, assignment, out)
    if out:
        return ValidationReport(tuple(out))
    if not inputs.components:
        out.append(Violation("input.components", "at least one component is required"))
        return ValidationReport(tuple(out))
    weights = [w for w, _ in inputs.components]
    if any(not (w >= 0 and math.isfinite(w)) for w in weights):
        out.append(Violation("input.components", "weights must be nonnegative"))
    elif abs(sum(weights) - 1.0) > PMF_TOL:
        out.append(Violation("input.components", "weights must sum to 1"))
    for q, (_, f) in enumerate(inputs.components):
        path = f"input.components[{q}]"
        if f.kind != net.kind:
            out.append(Violation(path, f"{f.kind} input for a {net.kind} network"))
        elif isinstance(f, DiscreteInput):
            _validate_discrete_factor(net, assignment, f, path, out)
        else:
            _validate_gaussian_factor(net, assignment, f, path, out)
    return ValidationReport(tuple(out))


def check(net: NetworkSpec, assignment: RelayAssignment, inputs: InputSpec) -> None:
    """Like :func:`validate` but raises :class:`ValidationError`."""
    report = validate(net, assignment, inputs)
    if not report.ok:
        raise ValidationError(report.violations)
