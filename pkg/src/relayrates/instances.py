"""Seeded random networks, assignments and inputs for property checks."""

from __future__ import annotations

import numpy as np

from .model import (
    DiscreteInput,
    DiscreteNetwork,
    GaussianInput,
    GaussianNetwork,
    InputSpec,
    RelayAssignment,
)


def _normalize(t: np.ndarray, axes: int) -> np.ndarray:
    """Normalize the trailing ``axes`` dimensions of ``t`` to sum to one."""
    lead = t.ndim - axes
    s = t.sum(axis=tuple(range(lead, t.ndim)), keepdims=True)
    return t / s


def random_pmf(rng: np.random.Generator, shape, axes: int, alpha: float = 0.7) -> np.ndarray:
    """Dirichlet(alpha) conditional pmf; the trailing ``axes`` dimensions are the outcome."""
    t = rng.gamma(alpha, size=shape) + 1e-12
    return _normalize(t, axes)


def random_assignment(rng: np.random.Generator, n: int) -> RelayAssignment:
    relays = np.arange(1, n + 1)
    mask = rng.random(n) < 0.5
    df = [int(i) for i in rng.permutation(relays[mask])]
    return RelayAssignment(frozenset(df), (0, *df, n + 1))


def random_discrete_network(rng, n: int, x_size: int = 2, y_size: int = 2, alpha: float = 0.5):
    x_sizes = (x_size,) * (n + 1)
    y_sizes = (y_size,) * (n + 1)
    channel = random_pmf(rng, x_sizes + y_sizes, n + 1, alpha)
    return DiscreteNetwork(n, x_sizes, y_sizes, channel)


def random_discrete_factor(rng, net: DiscreteNetwork, assignment: RelayAssignment, yhat_size: int = 2):
    n = net.n
    df = assignment.df_sorted()
    cf = sorted(assignment.cf_set(n))
    p_x0 = random_pmf(rng, (net.x_sizes[0],), 1, 1.0)
    p_xdf = None
    if df:
        shape = (net.x_sizes[0],) + tuple(net.x_sizes[i] for i in df)
        p_xdf = random_pmf(rng, shape, len(df), 1.0)
    p_xcf = {i: random_pmf(rng, (net.x_sizes[i],), 1, 1.0) for i in cf}
    p_yhat = {
        i: random_pmf(rng, (net.y_sizes[i - 1], net.x_sizes[i], yhat_size), 1, 0.5) for i in cf
    }
    return DiscreteInput(p_x0, p_xdf, p_xcf, p_yhat)


def random_gaussian_network(rng, n: int):
    gains = rng.uniform(0.1, 2.0, size=(n + 1, n + 1))
    for i in range(1, n + 1):
        gains[i, i - 1] = 0.0  # no self-reception
    noise = rng.uniform(0.5, 1.5, size=n + 1)
    power = rng.uniform(0.5, 3.0, size=n + 1)
    return GaussianNetwork(n, gains, tuple(noise), tuple(power))


def random_gaussian_factor(rng, net: GaussianNetwork, assignment: RelayAssignment):
    n = net.n
    nodes = (0,) + assignment.df_sorted()
    d = len(nodes)
    F = rng.normal(size=(d, d + 1))
    corr = F @ F.T
    s = np.sqrt(np.diag(corr))
    corr = corr / np.outer(s, s)
    scale = np.sqrt([net.power[i] * rng.uniform(0.3, 1.0) for i in nodes])
    cov = corr * np.outer(scale, scale)
    cf = sorted(assignment.cf_set(n))
    cf_power = {i: net.power[i] * rng.uniform(0.2, 1.0) for i in cf}
    quant = {i: float(np.exp(rng.uniform(np.log(0.05), np.log(5.0)))) for i in cf}
    return GaussianInput(cov, cf_power, quant)


def random_input(rng, net, assignment, components: int = 1) -> InputSpec:
    if net.kind == "discrete":
        factors = [random_discrete_factor(rng, net, assignment) for _ in range(components)]
    else:
        factors = [random_gaussian_factor(rng, net, assignment) for _ in range(components)]
    if components == 1:
        return InputSpec.single(factors[0])
    w = rng.dirichlet(np.ones(components))
    w[-1] = 1.0 - float(np.sum(w[:-1]))
    return InputSpec(tuple(zip(w.tolist(), factors)))
