"""Scenario files: an INI-style ``key = value`` format with sections.

Arrays are comma lists; matrices separate rows with ``;``. Agent indices
in ``edges`` are 1-based. See ``docs/scenario-format.md`` for the schema.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

PRESETS = ("paper_sec4", "static_quadratic")
GRAPH_FAMILIES = ("ring", "path", "complete", "edges")
COST_FAMILIES = ("quadratic_sinusoidal", "quadratic")
BOUND_MODES = ("region", "optimum", "declared")
SWEEPABLE = ("k_bar", "delta_c", "delta_t", "omega")
# sections written by the runner into summary files; ignored on load
PASSIVE_SECTIONS = ("summary",)

_SCHEMA = {
    "scenario": {"name"},
    "graph": {"family", "n_agents", "edges"},
    "costs": {"family", "curvature", "multiplier", "omega", "dimension", "hessian", "offset", "amplitude", "rate"},
    "algorithm": {"delta_t", "delta_c", "k_bar", "substeps", "horizon"},
    "initial": {"x0", "v0", "z0"},
    "bounds": {"mode", "region", "samples", "m", "l", "c0", "c1"},
    "checks": {"transient_fraction"},
}


class ScenarioError(ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None, source: str | None = None):
        loc = ""
        if source:
            loc += f"{source}"
        if line is not None:
            loc += f":{line}"
        if path:
            loc += f" [{path}]" if loc else f"[{path}]"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.message = message
        self.path = path
        self.line = line


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    graph_family: str = "ring"
    n_agents: int = 5
    edges: tuple[tuple[int, int, float], ...] = ()
    cost_family: str = "quadratic_sinusoidal"
    curvature: tuple[float, ...] = ()
    multiplier: tuple[float, ...] = ()
    omega: float = 0.05
    dimension: int = 1
    hessians: tuple[tuple[tuple[float, ...], ...], ...] = ()
    offsets: tuple[tuple[float, ...], ...] = ()
    amplitudes: tuple[tuple[float, ...], ...] = ()
    rates: tuple[float, ...] = ()
    delta_t: float = 0.1
    delta_c: float | str = "auto"
    k_bar: int = 10
    substeps: int = 10
    horizon: float = 50.0
    x0: tuple[float, ...] = ()
    v0: tuple[float, ...] = ()
    z0: tuple[float, ...] = ()
    bounds_mode: str = "region"
    region: tuple[float, float] = (-2.0, 2.0)
    bound_samples: int = 256
    declared_m: float | None = None
    declared_l: float | None = None
    declared_c0: float | None = None
    declared_c1: float | None = None
    transient_fraction: float = 0.5

    def __post_init__(self):
        validate(self)

    @property
    def auto_delta_c(self) -> bool:
        return self.delta_c == "auto"

    def with_param(self, name: str, value) -> Scenario:
        """Copy with one sweepable parameter replaced."""
        if name not in SWEEPABLE:
            raise ScenarioError(f"cannot sweep {name!r}; choose one of {', '.join(SWEEPABLE)}", path=name)
        if name == "omega" and self.cost_family != "quadratic_sinusoidal":
            raise ScenarioError("omega applies only to the quadratic_sinusoidal family", path="costs.omega")
        if name == "k_bar":
            value = _int_value(value, "algorithm.k_bar")
        elif name == "delta_c" and str(value).strip().lower() == "auto":
            value = "auto"
        else:
            value = float(value)
        return dataclasses.replace(self, **{name: value})


def _int_value(value, path: str) -> int:
    f = float(value)
    if f != int(f):
        raise ScenarioError(f"expected an integer, got {value!r}", path=path)
    return int(f)


def validate(s: Scenario) -> None:
    n = s.n_agents
    if n < 1:
        raise ScenarioError("need at least one agent", path="graph.n_agents")
    if s.graph_family not in GRAPH_FAMILIES:
        raise ScenarioError(f"unknown graph family {s.graph_family!r}", path="graph.family")
    if s.graph_family == "edges":
        if not s.edges and n > 1:
            raise ScenarioError("explicit graph needs an edge list", path="graph.edges")
        for i, j, w in s.edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ScenarioError(f"invalid edge ({i + 1}, {j + 1})", path="graph.edges")
            if w <= 0:
                raise ScenarioError(f"edge weight must be positive, got {w}", path="graph.edges")
    if s.cost_family not in COST_FAMILIES:
        raise ScenarioError(f"unknown cost family {s.cost_family!r}", path="costs.family")
    if s.cost_family == "quadratic_sinusoidal":
        if s.dimension != 1:
            raise ScenarioError("quadratic_sinusoidal costs are scalar", path="costs.dimension")
        if len(s.curvature) != n:
            raise ScenarioError(f"need {n} curvature values, got {len(s.curvature)}", path="costs.curvature")
        if len(s.multiplier) != n:
            raise ScenarioError(f"need {n} multiplier values, got {len(s.multiplier)}", path="costs.multiplier")
        if any(a <= 0 for a in s.curvature):
            raise ScenarioError("curvatures must be positive", path="costs.curvature")
    else:
        d = s.dimension
        if d < 1:
            raise ScenarioError("dimension must be positive", path="costs.dimension")
        if len(s.hessians) != n:
            raise ScenarioError(f"need {n} hessian matrices, got {len(s.hessians)}", path="costs.hessian")
        for i, h in enumerate(s.hessians):
            if np.asarray(h).shape != (d, d):
                raise ScenarioError(f"hessian of agent {i + 1} must be {d}x{d}", path=f"costs.hessian.{i + 1}")
        for name, vals in (("offset", s.offsets), ("amplitude", s.amplitudes)):
            if len(vals) != n or any(len(v) != d for v in vals):
                raise ScenarioError(f"need {n} {name} vectors of length {d}", path=f"costs.{name}")
        if len(s.rates) != n:
            raise ScenarioError(f"need {n} rates", path="costs.rate")
    if not s.delta_t > 0:
        raise ScenarioError(f"delta_t must be positive, got {s.delta_t}", path="algorithm.delta_t")
    if s.delta_c != "auto" and not (isinstance(s.delta_c, float) and s.delta_c > 0):
        raise ScenarioError(f"delta_c must be 'auto' or positive, got {s.delta_c!r}", path="algorithm.delta_c")
    if s.k_bar < 1:
        raise ScenarioError(f"k_bar must be at least 1, got {s.k_bar}", path="algorithm.k_bar")
    if s.substeps < 1:
        raise ScenarioError(f"substeps must be at least 1, got {s.substeps}", path="algorithm.substeps")
    if not s.horizon > 0:
        raise ScenarioError(f"horizon must be positive, got {s.horizon}", path="algorithm.horizon")
    intervals = s.horizon / s.delta_t
    if abs(intervals - round(intervals)) > 1e-9 * max(1.0, intervals):
        raise ScenarioError("horizon must be a multiple of delta_t", path="algorithm.horizon")
    size = n * s.dimension
    for name in ("x0", "v0", "z0"):
        vals = getattr(s, name)
        if len(vals) != size:
            raise ScenarioError(f"{name} needs {size} entries, got {len(vals)}", path=f"initial.{name}")
    if s.bounds_mode not in BOUND_MODES:
        raise ScenarioError(f"unknown bounds mode {s.bounds_mode!r}", path="bounds.mode")
    if s.region[0] > s.region[1]:
        raise ScenarioError("region lower bound exceeds upper bound", path="bounds.region")
    if s.bound_samples < 1:
        raise ScenarioError("samples must be at least 1", path="bounds.samples")
    if s.bounds_mode == "declared" and (s.declared_c0 is None or s.declared_c1 is None):
        raise ScenarioError("declared bounds need c0 and c1", path="bounds.c0")
    if not 0 <= s.transient_fraction < 1:
        raise ScenarioError("transient_fraction must be in [0, 1)", path="checks.transient_fraction")


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            lines[(section, "")] = no
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines[(section, m.group(1).strip().lower())] = no
    return lines


def _floats(text: str, path: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace("\n", " ").split(",") if v.strip())
    except ValueError as exc:
        raise ScenarioError(f"expected a comma list of numbers: {exc}", path=path) from None


def _matrix(text: str, path: str) -> tuple[tuple[float, ...], ...]:
    rows = tuple(_floats(r, path) for r in text.split(";") if r.strip())
    if len({len(r) for r in rows}) > 1:
        raise ScenarioError("matrix rows have different lengths", path=path)
    return rows


def _state_vector(text: str, size: int, path: str) -> tuple[float, ...]:
    word = text.strip().lower()
    if word == "zeros":
        return (0.0,) * size
    if word == "ones":
        return (1.0,) * size
    if word == "linspace":
        return tuple(float(v) for v in np.linspace(-1.0, 1.0, size)) if size > 1 else (0.0,)
    vals = _floats(text, path)
    if len(vals) == 1 and size > 1:
        return vals * size
    return vals


def _edges(text: str, path: str) -> tuple[tuple[int, int, float], ...]:
    out = []
    for item in text.replace("\n", " ").split(","):
        item = item.strip()
        if not item:
            continue
        m = re.fullmatch(r"(\d+)\s*-\s*(\d+)(?:\s*:\s*([0-9.eE+-]+))?", item)
        if not m:
            raise ScenarioError(f"bad edge {item!r}; use i-j or i-j:weight", path=path)
        w = float(m.group(3)) if m.group(3) else 1.0
        out.append((int(m.group(1)) - 1, int(m.group(2)) - 1, w))
    return tuple(out)


def parse_scenario(text: str, source: str | None = None) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=source or "<string>")
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario file: {exc}", source=source) from None
    lines = _key_lines(text)

    def err(msg, section, key=""):
        path = f"{section}.{key}" if key else section
        return ScenarioError(msg, path=path, line=lines.get((section, key)), source=source)

    for section in cp.sections():
        if section in PASSIVE_SECTIONS:
            continue
        if section not in _SCHEMA:
            raise err(f"unknown section [{section}]", section)
        for key in cp[section]:
            base = key.split(".")[0]
            if base not in _SCHEMA[section]:
                raise err(f"unknown key {key!r}", section, key)

    def get(section, key, default=None):
        if cp.has_option(section, key):
            return cp.get(section, key)
        return default

    kw = {}
    try:
        kw["name"] = get("scenario", "name", "scenario")
        kw["graph_family"] = get("graph", "family", "ring").strip().lower()
        n = _int_value(get("graph", "n_agents", "5"), "graph.n_agents")
        kw["n_agents"] = n
        if get("graph", "edges") is not None:
            kw["edges"] = _edges(get("graph", "edges"), "graph.edges")
        family = get("costs", "family", "quadratic_sinusoidal").strip().lower()
        kw["cost_family"] = family
        if family == "quadratic_sinusoidal":
            idx = tuple(float(i) for i in range(1, n + 1))
            kw["curvature"] = _floats(get("costs", "curvature"), "costs.curvature") if get("costs", "curvature") else idx
            kw["multiplier"] = _floats(get("costs", "multiplier"), "costs.multiplier") if get("costs", "multiplier") else idx
            kw["omega"] = float(get("costs", "omega", "0.05"))
            dim = 1
        else:
            dim = _int_value(get("costs", "dimension", "1"), "costs.dimension")
            hs, offs, amps, rates = [], [], [], []
            for i in range(1, n + 1):
                h = get("costs", f"hessian.{i}")
                if h is None:
                    raise err(f"missing hessian for agent {i}", "costs", f"hessian.{i}")
                hs.append(_matrix(h, f"costs.hessian.{i}"))
                offs.append(_state_vector(get("costs", f"offset.{i}", "zeros"), dim, f"costs.offset.{i}"))
                amps.append(_state_vector(get("costs", f"amplitude.{i}", "zeros"), dim, f"costs.amplitude.{i}"))
                rates.append(float(get("costs", f"rate.{i}", "0")))
            kw.update(hessians=tuple(hs), offsets=tuple(offs), amplitudes=tuple(amps), rates=tuple(rates))
        kw["dimension"] = dim
        kw["delta_t"] = float(get("algorithm", "delta_t", "0.1"))
        dc = get("algorithm", "delta_c", "auto").strip().lower()
        kw["delta_c"] = "auto" if dc == "auto" else float(dc)
        kw["k_bar"] = _int_value(get("algorithm", "k_bar", "10"), "algorithm.k_bar")
        kw["substeps"] = _int_value(get("algorithm", "substeps", "10"), "algorithm.substeps")
        kw["horizon"] = float(get("algorithm", "horizon", "50"))
        size = n * dim
        kw["x0"] = _state_vector(get("initial", "x0", "linspace"), size, "initial.x0")
        kw["v0"] = _state_vector(get("initial", "v0", "zeros"), size, "initial.v0")
        kw["z0"] = _state_vector(get("initial", "z0", "zeros"), size, "initial.z0")
        kw["bounds_mode"] = get("bounds", "mode", "region").strip().lower()
        region = _floats(get("bounds", "region", "-2, 2"), "bounds.region")
        if len(region) != 2:
            raise ScenarioError("region needs exactly two numbers: lo, hi", path="bounds.region")
        kw["region"] = region
        kw["bound_samples"] = _int_value(get("bounds", "samples", "256"), "bounds.samples")
        for key in ("m", "l", "c0", "c1"):
            val = get("bounds", key)
            kw[f"declared_{key}"] = None if val is None else float(val)
        kw["transient_fraction"] = float(get("checks", "transient_fraction", "0.5"))
        return Scenario(**kw)
    except ScenarioError as exc:
        if exc.line is None and exc.path and "." in exc.path:
            section, key = exc.path.split(".", 1)
            line = lines.get((section, key), lines.get((section, "")))
            raise ScenarioError(exc.message, path=exc.path, line=line, source=source) from None
        raise
    except ValueError as exc:
        raise ScenarioError(f"invalid value: {exc}", source=source) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text(), source=str(path))


def load_preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset {name!r}; choose one of {', '.join(PRESETS)}")
    text = resources.files("tvtrack").joinpath("presets", f"{name}.cfg").read_text()
    return parse_scenario(text, source=f"preset:{name}")


def _join(vals) -> str:
    return ", ".join(fmt(v) for v in vals)


def scenario_sections(s: Scenario, delta_c: float | None = None) -> dict[str, dict[str, str]]:
    """Fully resolved configuration; ``delta_c`` replaces ``auto`` when given."""
    graph = {"family": s.graph_family, "n_agents": str(s.n_agents)}
    if s.graph_family == "edges":
        graph["edges"] = ", ".join(f"{i + 1}-{j + 1}:{fmt(w)}" for i, j, w in s.edges)
    costs = {"family": s.cost_family, "dimension": str(s.dimension)}
    if s.cost_family == "quadratic_sinusoidal":
        costs.update(curvature=_join(s.curvature), multiplier=_join(s.multiplier), omega=fmt(s.omega))
    else:
        for i in range(s.n_agents):
            costs[f"hessian.{i + 1}"] = "; ".join(_join(r) for r in s.hessians[i])
            costs[f"offset.{i + 1}"] = _join(s.offsets[i])
            costs[f"amplitude.{i + 1}"] = _join(s.amplitudes[i])
            costs[f"rate.{i + 1}"] = fmt(s.rates[i])
    dc = s.delta_c if delta_c is None else delta_c
    bounds = {"mode": s.bounds_mode, "region": _join(s.region), "samples": str(s.bound_samples)}
    for key in ("m", "l", "c0", "c1"):
        val = getattr(s, f"declared_{key}")
        if val is not None:
            bounds[key] = fmt(val)
    return {
        "scenario": {"name": s.name},
        "graph": graph,
        "costs": costs,
        "algorithm": {
            "delta_t": fmt(s.delta_t),
            "delta_c": dc if dc == "auto" else fmt(dc),
            "k_bar": str(s.k_bar),
            "substeps": str(s.substeps),
            "horizon": fmt(s.horizon),
        },
        "initial": {"x0": _join(s.x0), "v0": _join(s.v0), "z0": _join(s.z0)},
        "bounds": bounds,
        "checks": {"transient_fraction": fmt(s.transient_fraction)},
    }


def render_sections(sections: dict[str, dict[str, str]]) -> str:
    out = []
    for name, items in sections.items():
        out.append(f"[{name}]")
        out.extend(f"{k} = {v}" for k, v in items.items())
        out.append("")
    return "\n".join(out)


def dump_scenario(s: Scenario, delta_c: float | None = None) -> str:
    return render_sections(scenario_sections(s, delta_c))
