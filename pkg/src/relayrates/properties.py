"""Seeded property suites over random instances.

``equivalence_suite`` cross-checks the rate engines against each other
(reductions, the two unified rates, joint vs noisy-network decoding,
decodable-set containment, optimality of the decodable set).
``oracle_suite`` checks the information-measure layer and the single-relay
closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rates
from .config import instance_to_json, parse_instance
from .infocalc import Evaluator, GaussianModel, JointPMF, cond_mi, quantized_gaussian_pmf
from .instances import (
    random_assignment,
    random_discrete_network,
    random_gaussian_network,
    random_input,
    random_pmf,
)
from .model import RelayAssignment


@dataclass
class Tally:
    passed: int = 0
    failed: int = 0
    worst: float = 0.0

    def add(self, ok: bool, gap: float) -> None:
        if ok:
            self.passed += 1
        else:
            self.failed += 1
        self.worst = max(self.worst, float(gap))

    def to_dict(self) -> dict:
        return {"passed": self.passed, "failed": self.failed, "worstDiscrepancy": self.worst}


@dataclass
class SuiteReport:
    tallies: dict[str, Tally] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)
    instances: int = 0

    @property
    def ok(self) -> bool:
        return all(t.failed == 0 for t in self.tallies.values())

    @property
    def worst(self) -> float:
        return max((t.worst for t in self.tallies.values()), default=0.0)

    def record(self, name: str, ok: bool, gap: float, instance: Callable[[], dict] | None = None):
        self.tallies.setdefault(name, Tally()).add(ok, gap)
        if not ok and instance is not None and len(self.failures) < 10:
            self.failures.append({"property": name, "discrepancy": float(gap), "instance": instance()})

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "instances": self.instances,
            "worstDiscrepancy": self.worst,
            "units": "bits/use",
            "properties": {k: t.to_dict() for k, t in sorted(self.tallies.items())},
            "failures": self.failures,
        }


# ----------------------------------------------------------------------------
# Rate-engine properties
# ----------------------------------------------------------------------------


def _level_T_values(ev, a, k, n):
    ctx = rates.level_context(a, k, n)
    vals = {}
    for T in rates.subsets(ctx.pool):
        vals[T] = min(rates.constraint_term(ev, ctx, T, S) for S in rates.subsets(T))
    return ctx, vals


def instance_properties(net, a: RelayAssignment, inputs, tol: float = rates.TOL) -> dict[str, tuple[bool, float]]:
    """Every property that applies to one (network, assignment, input) triple,
    as ``name -> (passed, discrepancy in bits)``."""
    ev = Evaluator(net, a, inputs)
    out: dict[str, tuple[bool, float]] = {}
    thm1 = rates.unified_rate_thm1(net, a, inputs, tol=tol, evaluator=ev).rate

    if a.df_set == net.relays:
        gap = abs(thm1 - rates.df_multilevel_rate(net, a, inputs, evaluator=ev).rate)
        out["reduction_df"] = (gap <= tol, gap)
    if a.M == 0:
        joint = rates.cf_joint_rate(net, inputs, tol=tol, evaluator=ev)
        gap = abs(thm1 - joint.rate)
        out["reduction_cf"] = (gap <= tol, gap)
        D, Dp = rates.cf_decodable_sets(net, inputs, tol=tol, evaluator=ev)
        vD = rates.nnc_rate_subset(net, inputs, D, evaluator=ev)
        vDp = rates.nnc_rate_subset(net, inputs, Dp, evaluator=ev)
        gap = max(abs(joint.rate - vD), abs(vD - vDp))
        out["nnc_equality"] = (gap <= tol, gap)

    thm2 = rates.unified_rate_thm2(net, a, inputs, tol=tol, evaluator=ev).rate
    gap = abs(thm1 - thm2)
    out["thm1_eq_thm2"] = (gap <= tol, gap)

    t3 = rates.verify_theorem3(net, a, inputs, tol=tol, evaluator=ev)
    out["decodable_set_maximizes"] = (t3.ok, max(t3.max_gap, 0.0))

    strict = rates.decodable_sets(net, a, inputs, strict=True, tol=tol, evaluator=ev)
    loose = rates.decodable_sets(net, a, inputs, strict=False, tol=tol, evaluator=ev)
    contained = all(strict[k] <= loose[k] for k in strict)
    out["containment"] = (contained, 0.0 if contained else 1.0)

    if len(a.cf_set(net.n)) <= 3:
        worst = 0.0
        for k in a.levels():
            ctx, vals = _level_T_values(ev, a, k, net.n)
            worst = max(worst, max(vals.values()) - vals[strict[k]])
        out["subset_optimality"] = (worst <= tol, max(worst, 0.0))
    return out


def _triples(rng, net, components):
    n = net.n
    all_df = RelayAssignment(frozenset(range(1, n + 1)), (0, *[int(i) for i in rng.permutation(np.arange(1, n + 1))], n + 1))
    for a in (RelayAssignment.all_cf(n), all_df, random_assignment(rng, n)):
        q = int(rng.integers(1, components + 1))
        yield a, random_input(rng, net, a, q)


def equivalence_suite(
    seed: int = 0,
    discrete_instances: int = 100,
    gaussian_instances: int = 50,
    max_relays_discrete: int = 3,
    max_relays_gaussian: int = 4,
    components: int = 2,
    tol: float = rates.TOL,
) -> SuiteReport:
    """Run every rate-engine property over seeded random networks.

    Each network contributes three triples: all relays compressing, all
    relays decoding (random order) and a random mix.
    """
    rng = np.random.default_rng(seed)
    report = SuiteReport()
    plan = [("discrete", max_relays_discrete)] * discrete_instances
    plan += [("gaussian", max_relays_gaussian)] * gaussian_instances
    for kind, nmax in plan:
        n = int(rng.integers(0, nmax + 1))
        net = random_discrete_network(rng, n) if kind == "discrete" else random_gaussian_network(rng, n)
        report.instances += 1
        for a, inputs in _triples(rng, net, components):
            for name, (ok, gap) in instance_properties(net, a, inputs, tol).items():
                report.record(name, ok, gap, lambda: instance_to_json(net, a, inputs))
    return report


def replay(instance: dict, tol: float = rates.TOL) -> SuiteReport:
    net, a, inputs = parse_instance(instance)
    report = SuiteReport(instances=1)
    for name, (ok, gap) in instance_properties(net, a, inputs, tol).items():
        report.record(name, ok, gap, lambda: instance)
    return report


# ----------------------------------------------------------------------------
# Information-measure and closed-form oracles
# ----------------------------------------------------------------------------


def info_identities(pmf: JointPMF, names) -> tuple[float, float]:
    """Return (chain-rule error, most negative information quantity) for a
    four-variable pmf."""
    a, b, c, d = names
    lhs = cond_mi(pmf, {a}, {b, c}, {d})
    rhs = cond_mi(pmf, {a}, {b}, {d}) + cond_mi(pmf, {a}, {c}, {b, d})
    quantities = [
        cond_mi(pmf, {a}, {b}),
        cond_mi(pmf, {a}, {b}, {c}),
        cond_mi(pmf, {a, b}, {c}, {d}),
        pmf.joint_entropy({a, b}) - pmf.joint_entropy({b}),
    ]
    return abs(lhs - rhs), min(quantities)


def gaussian_vs_quantized(cov) -> float:
    """Absolute gap (bits) between the Gaussian and the finely quantized
    mutual information of a bivariate normal."""
    g = GaussianModel(("U", "V"), cov)
    q = quantized_gaussian_pmf(cov)
    return abs(cond_mi(g, {"U"}, {"V"}) - cond_mi(q, {"A"}, {"B"}))


def classic_checks(net, inputs_df, inputs_cf, tol: float = rates.TOL) -> dict[str, float]:
    """Single-relay closed forms vs the general engines (absolute gaps)."""
    df_a = RelayAssignment.all_df(1)
    cf_a = RelayAssignment.all_cf(1)
    c_df = rates.classic_single_relay_rates(net, df_a, inputs_df)
    out = {"df": abs(c_df.df - rates.unified_rate_thm1(net, df_a, inputs_df, tol=tol).rate)}
    ev = Evaluator(net, cf_a, inputs_cf)
    c = rates.classic_single_relay_rates(net, cf_a, inputs_cf, evaluator=ev)
    joint = rates.cf_joint_rate(net, inputs_cf, tol=tol, evaluator=ev).rate
    # relay 1 undecodable -> its input is treated as noise
    direct = ev.mi({"X0"}, {"Y2"})
    out["cf_joint"] = abs(joint - max(c.cf_joint, direct))
    succ = rates.cf_successive_rate(net, inputs_cf, tol=tol, evaluator=ev)
    if isinstance(succ, rates.Infeasible) == c.cf_successive_feasible:
        out["cf_successive"] = 1.0  # feasibility verdicts disagree
    elif not isinstance(succ, rates.Infeasible):
        out["cf_successive"] = abs(succ.rate - c.cf_successive)
    return out


def oracle_suite(seed: int = 0, pmfs: int = 1000, gaussian_models: int = 20, classic: int = 50) -> SuiteReport:
    rng = np.random.default_rng(seed)
    report = SuiteReport()
    names = ("A", "B", "C", "D")
    for _ in range(pmfs):
        shape = tuple(int(s) for s in rng.integers(1, 4, size=4))
        pmf = JointPMF(names, random_pmf(rng, shape, 4, alpha=float(rng.choice([0.2, 1.0]))))
        err, low = info_identities(pmf, names)
        report.record("chain_rule", err <= 1e-8, err)
        report.record("nonnegativity", low >= -1e-8, max(-low, 0.0))
    for _ in range(gaussian_models):
        s1, s2 = rng.uniform(0.3, 3.0, size=2)
        rho = rng.uniform(-0.95, 0.95)
        cov = np.array([[s1 * s1, rho * s1 * s2], [rho * s1 * s2, s2 * s2]])
        gap = gaussian_vs_quantized(cov)
        report.record("gaussian_vs_quantized", gap <= 0.05, gap)
    for _ in range(classic):
        net = random_discrete_network(rng, 1)
        ins_df = random_input(rng, net, RelayAssignment.all_df(1))
        ins_cf = random_input(rng, net, RelayAssignment.all_cf(1))
        for name, gap in classic_checks(net, ins_df, ins_cf).items():
            report.record(f"classic_{name}", gap <= rates.TOL, gap)
    report.instances = pmfs + gaussian_models + classic
    return report
