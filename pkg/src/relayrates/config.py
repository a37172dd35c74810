"""JSON run configuration (schema version 1) and instance (de)serialization.

Parsing is fail-closed: unknown keys, wrong types and missing required keys
raise :class:`ConfigError` with the dotted path of the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .model import (
    DiscreteInput,
    DiscreteNetwork,
    GaussianInput,
    GaussianNetwork,
    InputSpec,
    RelayAssignment,
)
from .search import SearchConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _fields(d: Any, path: str, required: tuple[str, ...] = (), optional: tuple[str, ...] = ()) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    unknown = sorted(set(d) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}", "unknown field")
    for key in required:
        if key not in d:
            raise ConfigError(f"{path}.{key}", "missing required field")
    return d


def _int(v, path, lo=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, "expected an integer")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return v


def _float(v, path) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, "expected a finite number")
    return float(v)


def _array(v, path) -> np.ndarray:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a (nested) list of numbers") from None
    if a.dtype == object:
        raise ConfigError(path, "ragged array")
    return a


def _grid(v, path) -> tuple[float, ...]:
    if not isinstance(v, list):
        raise ConfigError(path, "expected a list of numbers")
    return tuple(_float(x, f"{path}[{i}]") for i, x in enumerate(v))


def _int_keyed(v, path, conv) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(path, "expected an object keyed by relay index")
    out = {}
    for k, x in v.items():
        try:
            i = int(k)
        except ValueError:
            raise ConfigError(f"{path}.{k}", "keys must be relay indices") from None
        out[i] = conv(x, f"{path}.{k}")
    return out


# ----------------------------------------------------------------------------
# Instances
# ----------------------------------------------------------------------------


def parse_network(d, path="network"):
    kind = _fields(d, path, ("kind",), ("n", "xSizes", "ySizes", "channel", "gains", "noise", "power"))["kind"]
    if kind == "discrete":
        _fields(d, path, ("kind", "n", "xSizes", "ySizes", "channel"))
        n = _int(d["n"], f"{path}.n", 0)
        xs = tuple(_int(x, f"{path}.xSizes[{i}]", 1) for i, x in enumerate(d["xSizes"]))
        ys = tuple(_int(y, f"{path}.ySizes[{i}]", 1) for i, y in enumerate(d["ySizes"]))
        return DiscreteNetwork(n, xs, ys, _array(d["channel"], f"{path}.channel"))
    if kind == "gaussian":
        _fields(d, path, ("kind", "n", "gains", "noise", "power"))
        n = _int(d["n"], f"{path}.n", 0)
        return GaussianNetwork(
            n,
            np.atleast_2d(_array(d["gains"], f"{path}.gains")),
            tuple(_grid(d["noise"], f"{path}.noise")),
            tuple(_grid(d["power"], f"{path}.power")),
        )
    raise ConfigError(f"{path}.kind", "must be 'discrete' or 'gaussian'")


def parse_assignment(d, path="assignment") -> RelayAssignment:
    _fields(d, path, ("order",))
    if not isinstance(d["order"], list) or len(d["order"]) < 2:
        raise ConfigError(f"{path}.order", "expected a list [0, ..., n+1]")
    order = tuple(_int(v, f"{path}.order[{i}]", 0) for i, v in enumerate(d["order"]))
    return RelayAssignment.from_order(order)


def parse_input(d, net, assignment, path="input") -> InputSpec:
    from .search import gaussian_input

    comps = _fields(d, path, ("components",))["components"]
    if not isinstance(comps, list) or not comps:
        raise ConfigError(f"{path}.components", "expected a nonempty list")
    out = []
    for q, c in enumerate(comps):
        p = f"{path}.components[{q}]"
        if net.kind == "gaussian":
            _fields(c, p, ("weight",), ("cov", "cfPower", "quantNoise", "parameters"))
            if "parameters" in c:
                _fields(c, p, ("weight", "parameters"))
                params = c["parameters"]
                if not isinstance(params, dict):
                    raise ConfigError(f"{p}.parameters", "expected an object")
                vals = {k: _float(v, f"{p}.parameters.{k}") for k, v in params.items()}
                try:
                    f = gaussian_input(net, assignment, vals)
                except (KeyError, ValueError) as exc:
                    raise ConfigError(f"{p}.parameters", f"bad parameter set ({exc})") from None
            else:
                _fields(c, p, ("weight", "cov", "cfPower", "quantNoise"))
                f = GaussianInput(
                    _array(c["cov"], f"{p}.cov"),
                    _int_keyed(c["cfPower"], f"{p}.cfPower", _float),
                    _int_keyed(c["quantNoise"], f"{p}.quantNoise", _float),
                )
        else:
            _fields(c, p, ("weight", "px0", "pxCf", "pYhat"), ("pxDf",))
            pxdf = c.get("pxDf")
            f = DiscreteInput(
                _array(c["px0"], f"{p}.px0"),
                None if pxdf is None else _array(pxdf, f"{p}.pxDf"),
                _int_keyed(c["pxCf"], f"{p}.pxCf", _array),
                _int_keyed(c["pYhat"], f"{p}.pYhat", _array),
            )
        out.append((_float(c["weight"], f"{p}.weight"), f))
    return InputSpec(tuple(out))


def network_to_json(net) -> dict:
    if net.kind == "discrete":
        return {
            "kind": "discrete",
            "n": net.n,
            "xSizes": list(net.x_sizes),
            "ySizes": list(net.y_sizes),
            "channel": net.channel.tolist(),
        }
    return {
        "kind": "gaussian",
        "n": net.n,
        "gains": np.asarray(net.gains).tolist(),
        "noise": [float(v) for v in net.noise],
        "power": [float(v) for v in net.power],
    }


def assignment_to_json(a: RelayAssignment) -> dict:
    return {"order": list(a.order)}


def input_to_json(inputs: InputSpec) -> dict:
    comps = []
    for w, f in inputs.components:
        if f.kind == "gaussian":
            comps.append({
                "weight": w,
                "cov": f.cov_df.tolist(),
                "cfPower": {str(i): v for i, v in sorted(f.cf_power.items())},
                "quantNoise": {str(i): v for i, v in sorted(f.quant_noise.items())},
            })
        else:
            comps.append({
                "weight": w,
                "px0": f.p_x0.tolist(),
                "pxDf": None if f.p_xdf is None else f.p_xdf.tolist(),
                "pxCf": {str(i): v.tolist() for i, v in sorted(f.p_xcf.items())},
                "pYhat": {str(i): v.tolist() for i, v in sorted(f.p_yhat.items())},
            })
    return {"components": comps}


def instance_to_json(net, assignment, inputs) -> dict:
    return {
        "network": network_to_json(net),
        "assignment": assignment_to_json(assignment),
        "input": input_to_json(inputs),
    }


def parse_instance(d, path="replay"):
    _fields(d, path, ("network", "assignment", "input"))
    net = parse_network(d["network"], f"{path}.network")
    a = parse_assignment(d["assignment"], f"{path}.assignment")
    return net, a, parse_input(d["input"], net, a, f"{path}.input")


# ----------------------------------------------------------------------------
# Sections
# ----------------------------------------------------------------------------


def parse_search(d, path="search") -> SearchConfig:
    keys = {
        "maxRelays": "max_relays", "rhoGrid": "rho_grid", "dfPowerGrid": "df_power_grid",
        "cfPowerGrid": "cf_power_grid", "quantGrid": "quant_grid", "mode": "mode",
        "objective": "objective", "sweeps": "sweeps", "relStop": "rel_stop",
        "maxPoints": "max_points",
    }
    _fields(d, path, (), tuple(keys))
    kw = {}
    for k, v in d.items():
        p = f"{path}.{k}"
        if k.endswith("Grid"):
            kw[keys[k]] = _grid(v, p)
        elif k in ("mode", "objective"):
            if not isinstance(v, str):
                raise ConfigError(p, "expected a string")
            kw[keys[k]] = v
        elif k == "relStop":
            kw[keys[k]] = _float(v, p)
        else:
            kw[keys[k]] = _int(v, p, 0)
    try:
        return SearchConfig(**kw)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


@dataclass(frozen=True)
class ScheduleSection:
    variant: str
    M: int
    B: int
    L: int | None = None
    block_cap: int = 10**6
    corrupt: tuple[int, int, int] | None = None  # (level, fromBlock, toBlock)


def parse_schedule(d, path="schedule") -> ScheduleSection:
    _fields(d, path, ("variant", "M", "B"), ("L", "blockCap", "corrupt"))
    variant = d["variant"]
    if variant not in ("thm1", "thm2"):
        raise ConfigError(f"{path}.variant", "must be 'thm1' or 'thm2'")
    M = _int(d["M"], f"{path}.M", 1)
    B = _int(d["B"], f"{path}.B", 2)
    L = None
    if variant == "thm1":
        L = _int(d.get("L", 1), f"{path}.L", 1)
        if L >= B:
            raise ConfigError(f"{path}.L", "must satisfy L < B")
    elif "L" in d:
        raise ConfigError(f"{path}.L", "only used by the thm1 variant")
    corrupt = None
    if "corrupt" in d:
        c = _fields(d["corrupt"], f"{path}.corrupt", ("level", "fromBlock", "toBlock"))
        corrupt = tuple(_int(c[k], f"{path}.corrupt.{k}", 0) for k in ("level", "fromBlock", "toBlock"))
    return ScheduleSection(variant, M, B, L, _int(d.get("blockCap", 10**6), f"{path}.blockCap", 1), corrupt)


@dataclass(frozen=True)
class EquivSection:
    discrete_instances: int = 100
    gaussian_instances: int = 50
    max_relays_discrete: int = 3
    max_relays_gaussian: int = 4
    components: int = 2
    replay: dict | None = None


def parse_equiv(d, path="equiv") -> EquivSection:
    keys = {
        "discreteInstances": "discrete_instances", "gaussianInstances": "gaussian_instances",
        "maxRelaysDiscrete": "max_relays_discrete", "maxRelaysGaussian": "max_relays_gaussian",
        "components": "components",
    }
    _fields(d, path, (), (*keys, "replay"))
    kw = {keys[k]: _int(v, f"{path}.{k}", 0) for k, v in d.items() if k in keys}
    if kw.get("components", 1) < 1:
        raise ConfigError(f"{path}.components", "must be >= 1")
    if "replay" in d:
        parse_instance(d["replay"], f"{path}.replay")  # fail early on a bad replay
        kw["replay"] = d["replay"]
    return EquivSection(**kw)


@dataclass(frozen=True)
class OracleSection:
    pmfs: int = 1000
    gaussian_models: int = 20


def parse_oracle(d, path="oracle") -> OracleSection:
    _fields(d, path, (), ("pmfs", "gaussianModels"))
    return OracleSection(
        _int(d.get("pmfs", 1000), f"{path}.pmfs", 0),
        _int(d.get("gaussianModels", 20), f"{path}.gaussianModels", 0),
    )


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    tol: float = 1e-9
    seed: int = 0
    network: Any = None
    assignment: RelayAssignment | None = None
    inputs: InputSpec | None = None
    search: SearchConfig = field(default_factory=SearchConfig)
    schedule: ScheduleSection | None = None
    equiv: EquivSection = field(default_factory=EquivSection)
    oracle: OracleSection = field(default_factory=OracleSection)


SECTIONS = ("network", "assignment", "input", "search", "schedule", "equiv", "oracle")


def parse_config(d: dict) -> RunConfig:
    _fields(d, "config", ("schemaVersion",), (*SECTIONS, "tol", "seed"))
    if d["schemaVersion"] != SCHEMA_VERSION:
        raise ConfigError("config.schemaVersion", f"unsupported version (expected {SCHEMA_VERSION})")
    tol = _float(d.get("tol", 1e-9), "config.tol")
    if tol <= 0:
        raise ConfigError("config.tol", "must be > 0")
    seed = _int(d.get("seed", 0), "config.seed", 0)
    net = parse_network(d["network"]) if "network" in d else None
    a = None
    if "assignment" in d:
        a = parse_assignment(d["assignment"])
    elif net is not None:
        a = RelayAssignment.all_cf(net.n)
    inputs = None
    if "input" in d:
        if net is None:
            raise ConfigError("config.input", "needs a network")
        inputs = parse_input(d["input"], net, a)
    return RunConfig(
        raw=d,
        tol=tol,
        seed=seed,
        network=net,
        assignment=a,
        inputs=inputs,
        search=parse_search(d.get("search", {})),
        schedule=parse_schedule(d["schedule"]) if "schedule" in d else None,
        equiv=parse_equiv(d.get("equiv", {})),
        oracle=parse_oracle(d.get("oracle", {})),
    )


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON ({exc})") from None
    return parse_config(d)
