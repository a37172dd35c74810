"""Entropy and conditional mutual information engine.

Two model kinds share one interface:

* :class:`JointPMF` -- a dense probability table over named discrete variables;
  information quantities are exact sums over the table.
* :class:`GaussianModel` -- a joint covariance over named scalar Gaussian
  variables; information quantities come from log-determinants.

Variables are named ``X0..Xn`` (transmitters), ``Y1..Y{n+1}`` (receivers) and
``Yh{i}`` (compression of C-F relay ``i``). All results are in bits.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .model import (
    DiscreteInput,
    DiscreteNetwork,
    GaussianInput,
    GaussianNetwork,
    InputSpec,
    NetworkSpec,
    RelayAssignment,
    ResourceCapError,
    check,
)

DEFAULT_STATE_CAP = 2**24
PIVOT_TOL = 1e-12
NEG_TOL = 1e-9

_LN2 = math.log(2.0)


def X(i: int) -> str:
    return f"X{i}"


def Y(j: int) -> str:
    return f"Y{j}"


def YH(i: int) -> str:
    return f"Yh{i}"


def xs(nodes: Iterable[int]) -> frozenset[str]:
    return frozenset(X(i) for i in nodes)


def ys(nodes: Iterable[int]) -> frozenset[str]:
    return frozenset(Y(j) for j in nodes)


def yhs(nodes: Iterable[int]) -> frozenset[str]:
    return frozenset(YH(i) for i in nodes)


def _clamp(v: float) -> float:
    # tiny negative values are round-off; anything below -NEG_TOL is passed through
    return 0.0 if -NEG_TOL <= v < 0.0 else v


class _Model:
    names: tuple[str, ...]

    def __init__(self, names: Sequence[str]):
        self.names = tuple(names)
        self.index = {name: k for k, name in enumerate(self.names)}
        if len(self.index) != len(self.names):
            raise ValueError("duplicate variable names")
        self._cache: dict[frozenset[str], float] = {}

    def _check_vars(self, group: frozenset[str]) -> None:
        unknown = group - self.index.keys()
        if unknown:
            raise KeyError(f"unregistered variables: {sorted(unknown)}")

    def joint_entropy(self, group: Iterable[str]) -> float:
        """Entropy (bits) of the variable group; for Gaussian models this is the
        log-det part, ``0.5 * log2 det`` of the covariance block."""
        key = frozenset(group)
        if key not in self._cache:
            self._check_vars(key)
            self._cache[key] = self._entropy(key) if key else 0.0
        return self._cache[key]

    def _entropy(self, key: frozenset[str]) -> float:  # pragma: no cover - abstract
        raise NotImplementedError


class JointPMF(_Model):
    """Dense pmf over the product of named finite alphabets."""

    def __init__(self, names: Sequence[str], table: np.ndarray):
        super().__init__(names)
        self.table = np.asarray(table, dtype=float)
        if self.table.ndim != len(self.names):
            raise ValueError("table rank does not match variable registry")
        total = float(self.table.sum())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"total mass {total} differs from 1")
        self.sizes = dict(zip(self.names, self.table.shape))

    def marginal(self, group: Iterable[str]) -> np.ndarray:
        keep = sorted(self.index[v] for v in group)
        drop = tuple(k for k in range(self.table.ndim) if k not in keep)
        return self.table.sum(axis=drop) if drop else self.table

    def _entropy(self, key):
        p = self.marginal(key).ravel()
        p = p[p > 0]
        return float(-np.sum(p * np.log2(p)))


class GaussianModel(_Model):
    """Zero-mean jointly Gaussian scalars with covariance ``cov``.

    Log-determinants use the pseudo-determinant over the positive spectrum
    (eigenvalues above ``PIVOT_TOL`` relative to the block scale), so
    deterministic or perfectly correlated inputs contribute nothing instead
    of ``-inf``.
    """

    def __init__(self, names: Sequence[str], cov: np.ndarray):
        super().__init__(names)
        cov = np.asarray(cov, dtype=float)
        self.cov = (cov + cov.T) / 2
        eig = np.linalg.eigvalsh(self.cov)
        if eig.size and eig[0] < -NEG_TOL * max(1.0, float(eig[-1])):
            raise ValueError("joint covariance is not PSD")

    def logdet2(self, group: Iterable[str]) -> float:
        """``log2`` pseudo-determinant of the covariance block of ``group``."""
        idx = sorted(self.index[v] for v in group)
        if not idx:
            return 0.0
        block = self.cov[np.ix_(idx, idx)]
        eig = np.linalg.eigvalsh(block)
        scale = max(1.0, float(np.max(np.abs(eig))))
        pos = eig[eig > PIVOT_TOL * scale]
        return float(np.sum(np.log(pos)) / _LN2)

    def _entropy(self, key):
        return 0.5 * self.logdet2(key)


Model = JointPMF | GaussianModel


def cond_mi(model: Model, A: Iterable[str], B: Iterable[str], C: Iterable[str] = ()) -> float:
    """``I(A; B | C)`` in bits.

    Computed as ``H(A,C) + H(B,C) - H(C) - H(A,B,C)``; for Gaussian models the
    entropies reduce to half log-determinants so this is the usual
    ``0.5 log2(det S_AC det S_BC / (det S_C det S_ABC))``.
    """
    A, B, C = frozenset(A), frozenset(B), frozenset(C)
    if A & B or A & C or B & C:
        raise ValueError("A, B and C must be pairwise disjoint")
    model._check_vars(A | B | C)
    if not A or not B:
        return 0.0
    h = model.joint_entropy
    return _clamp(h(A | C) + h(B | C) - h(C) - h(A | B | C))


def entropy(model: JointPMF, A: Iterable[str], C: Iterable[str] = ()) -> float:
    """Conditional entropy ``H(A | C)`` of a discrete model, in bits."""
    A, C = frozenset(A), frozenset(C)
    return model.joint_entropy(A | C) - model.joint_entropy(C)


def mixture_cond_mi(components, A, B, C=()) -> float:
    """Time-sharing average ``sum_q w_q I(A; B | C, Q=q)`` over ``(weight, model)`` pairs."""
    return float(sum(w * cond_mi(m, A, B, C) for w, m in components if w != 0.0))


# ----------------------------------------------------------------------------
# Assembly
# ----------------------------------------------------------------------------


def variable_names(n: int, cf: Iterable[int]) -> tuple[str, ...]:
    return (
        tuple(X(i) for i in range(n + 1))
        + tuple(Y(j) for j in range(1, n + 2))
        + tuple(YH(i) for i in sorted(cf))
    )


def _assemble_discrete(net: DiscreteNetwork, a: RelayAssignment, f: DiscreteInput, cap: int):
    n = net.n
    cf = sorted(a.cf_set(n))
    df = a.df_sorted()
    yhat_sizes = [f.p_yhat[i].shape[2] for i in cf]
    sizes = list(net.x_sizes) + list(net.y_sizes) + yhat_sizes
    cells = math.prod(sizes)
    if cells > cap:
        product = " x ".join(str(s) for s in sizes)
        raise ResourceCapError(
            f"joint state space {product} = {cells} cells exceeds cap {cap}"
        )
    names = variable_names(n, cf)
    letters = [chr(ord("a") + k) if k < 26 else chr(ord("A") + k - 26) for k in range(len(names))]
    lab = dict(zip(names, letters))

    operands = [f.p_x0]
    subs = [lab[X(0)]]
    if df:
        operands.append(f.p_xdf)
        subs.append(lab[X(0)] + "".join(lab[X(i)] for i in df))
    for i in cf:
        operands.append(f.p_xcf[i])
        subs.append(lab[X(i)])
    operands.append(net.channel)
    subs.append(
        "".join(lab[X(i)] for i in range(n + 1)) + "".join(lab[Y(j)] for j in range(1, n + 2))
    )
    for i in cf:
        operands.append(f.p_yhat[i])
        subs.append(lab[Y(i)] + lab[X(i)] + lab[YH(i)])
    expr = ",".join(subs) + "->" + "".join(letters)
    table = np.einsum(expr, *operands, optimize=False)
    return JointPMF(names, table)


def _assemble_gaussian(net: GaussianNetwork, a: RelayAssignment, f: GaussianInput):
    n = net.n
    cf = sorted(a.cf_set(n))
    df_nodes = (0,) + a.df_sorted()
    cov_x = np.zeros((n + 1, n + 1))
    cov_x[np.ix_(df_nodes, df_nodes)] = f.cov_df
    for i in cf:
        cov_x[i, i] = f.cf_power[i]
    G = net.gains  # (n+1) transmitters x (n+1) receivers
    cov_xy = cov_x @ G
    cov_y = G.T @ cov_x @ G + np.diag(net.noise)
    size = 2 * (n + 1) + len(cf)
    cov = np.zeros((size, size))
    nx = n + 1
    cov[:nx, :nx] = cov_x
    cov[:nx, nx : 2 * nx] = cov_xy
    cov[nx : 2 * nx, :nx] = cov_xy.T
    cov[nx : 2 * nx, nx : 2 * nx] = cov_y
    # Yhat_i = Y_i + Zhat_i shares all cross terms of Y_i
    for k, i in enumerate(cf):
        r = 2 * nx + k
        yi = nx + (i - 1)
        cov[r, : 2 * nx] = cov[yi, : 2 * nx]
        cov[: 2 * nx, r] = cov[: 2 * nx, yi]
        for k2, i2 in enumerate(cf):
            cov[r, 2 * nx + k2] = cov_y[i - 1, i2 - 1]
        cov[r, r] = cov_y[i - 1, i - 1] + f.quant_noise[i]
    return GaussianModel(variable_names(n, cf), cov)


def assemble_joint(
    net: NetworkSpec,
    assignment: RelayAssignment,
    component,
    *,
    state_cap: int = DEFAULT_STATE_CAP,
) -> Model:
    """Joint law of all inputs, outputs and compressions for one input component."""
    if isinstance(net, DiscreteNetwork):
        return _assemble_discrete(net, assignment, component, state_cap)
    return _assemble_gaussian(net, assignment, component)


class Evaluator:
    """Mixture-averaged information quantities for one (network, assignment, input).

    Validates the triple once and assembles one model per time-sharing
    component; every ``mi`` call is the weighted average over components.
    """

    def __init__(
        self,
        net: NetworkSpec,
        assignment: RelayAssignment,
        inputs: InputSpec,
        *,
        state_cap: int = DEFAULT_STATE_CAP,
        validate: bool = True,
    ):
        if validate:
            check(net, assignment, inputs)
        self.net = net
        self.assignment = assignment
        self.inputs = inputs
        self.components = [
            (w, assemble_joint(net, assignment, f, state_cap=state_cap))
            for w, f in inputs.components
        ]

    @property
    def n(self) -> int:
        return self.net.n

    def mi(self, A, B, C=()) -> float:
        return mixture_cond_mi(self.components, A, B, C)


# ----------------------------------------------------------------------------
# Quantized Gaussian oracle
# ----------------------------------------------------------------------------


def quantized_gaussian_pmf(cov: np.ndarray, bins: int = 128, span: float = 5.0, sub: int = 16):
    """Discretize a zero-mean bivariate Gaussian onto a ``bins x bins`` grid.

    Each axis covers ``+-span`` standard deviations with the two outer cells
    stretched to infinity. Cell masses are obtained by writing
    ``V = a U + c W`` (``U, W`` independent standard normals, ``U`` the
    standardized first coordinate) and integrating the exact conditional
    normal CDF over ``U`` with a ``sub``-point midpoint rule per cell.
    """
    from scipy.special import ndtr

    cov = np.asarray(cov, dtype=float)
    s1, s2 = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
    rho = cov[0, 1] / (s1 * s2)
    c = math.sqrt(max(1.0 - rho * rho, 0.0))
    edges = np.linspace(-span, span, bins + 1)
    edges[0], edges[-1] = -np.inf, np.inf
    table = np.zeros((bins, bins))
    inner = np.linspace(-span, span, bins + 1)
    for a in range(bins):
        lo, hi = inner[a], inner[a + 1]
        if a == 0:
            lo = -span - 3.0
        if a == bins - 1:
            hi = span + 3.0
        u = lo + (np.arange(sub) + 0.5) * (hi - lo) / sub
        w = np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi) * (hi - lo) / sub
        mean = rho * u
        cdf = ndtr((edges[None, :] - mean[:, None]) / c) if c > 0 else (
            (edges[None, :] >= mean[:, None]).astype(float)
        )
        table[a] = w @ np.diff(cdf, axis=1)
    table /= table.sum()
    return JointPMF(("A", "B"), table)
