"""Run configuration: JSON schema validation and object building.

A configuration names a chart, exactly one dynamics source (symbol,
lagrangian, or energy), a front, a flow, and output formats.  All user
scalar fields are expressions in the chart coordinates x1..xn plus the
fiber variable (v, u or w as appropriate).  Validation is eager: every
expression is parsed and its free variables checked before any
numerics run.
"""
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, ExpressionError
from .expressions import parse_expression
from .front import (build_front, circle_embedding, circle_params,
                    latitude_embedding, plane_embedding, segment_embedding)
from .geometry import (MetricChart, conformal_chart, diagonal_chart,
                       euclidean_chart, polar_chart, sphere_chart)
from .legendre import SphericalLagrangian, energy_from_function
from .flow import StepperConfig
from .symbol import PolySymbol

_CHART_FAMILIES = ("euclidean", "polar", "sphere", "diagonal", "conformal")
_FRONT_FAMILIES = ("circle", "segment", "latitude", "plane", "expression")
_FORMS = ("hamilton", "modified", "newtonian")
_FORMATS = ("csv", "dat", "json")
_TOP_KEYS = {"dim", "chart", "symbol", "lagrangian", "energy", "h",
             "front", "flow", "output"}


def load_config(path):
    """Read a JSON configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None


def canonical_json(obj):
    """The canonical serialization used for echo comparisons."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)


def _require(cfg, key, where="config"):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return cfg[key]


def _coords(dim):
    return [f"x{i + 1}" for i in range(dim)]


def _parse_field(src, allowed, where):
    try:
        expr = parse_expression(str(src))
        expr.check_variables(set(allowed))
    except ExpressionError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    return expr


@dataclass
class SimConfig:
    """Validated configuration with built objects and the raw echo."""
    raw: dict
    dim: int
    chart: MetricChart
    source_kind: str                  # "symbol" | "lagrangian" | "energy"
    symbol: Optional[PolySymbol]
    lagrangian: Optional[SphericalLagrangian]
    energy: Optional[object]
    h: Optional[object]               # callable w -> float, or None
    front_spec: dict
    flow_form: str
    stepper: StepperConfig
    snapshot_times: list
    formats: list


def _build_chart(spec, dim):
    family = _require(spec, "family", "chart")
    if family not in _CHART_FAMILIES:
        raise ConfigError(f"chart.family must be one of {_CHART_FAMILIES}, "
                          f"got {family!r}")
    if family == "euclidean":
        return euclidean_chart(dim)
    if family == "polar":
        if dim != 2:
            raise ConfigError("polar chart is 2-dimensional")
        return polar_chart(r_min=float(spec.get("r_min", 1e-9)))
    if family == "sphere":
        if dim != 2:
            raise ConfigError("sphere chart is 2-dimensional")
        return sphere_chart(radius=float(spec.get("radius", 1.0)))
    coords = _coords(dim)
    if family == "diagonal":
        entries = _require(spec, "entries", "chart")
        if len(entries) != dim:
            raise ConfigError(f"chart.entries needs {dim} expressions")
        fns = []
        for i, src in enumerate(entries):
            expr = _parse_field(src, coords, f"chart.entries[{i}]")
            fns.append(lambda x, e=expr: e.evaluate(
                {c: float(x[k]) for k, c in enumerate(coords)}))
        domain = spec.get("domain")
        return diagonal_chart(fns, domain=domain, name="diagonal")
    # conformal
    src = _require(spec, "phi", "chart")
    expr = _parse_field(src, coords, "chart.phi")

    def phi(x):
        return expr.evaluate({c: float(x[k]) for k, c in enumerate(coords)})

    return conformal_chart(dim, phi, domain=spec.get("domain"))


def _coeff_entry(value, coords, where):
    """One coefficient slot: number or expression string."""
    if isinstance(value, (int, float)):
        return float(value), None
    expr = _parse_field(value, coords, where)
    return None, expr


def _build_coefficient(r, entry, dim, chart, coords):
    """Order-r coefficient from a scalar, nested lists, or a keyword."""
    if r == 2 and entry == "inverse_metric":
        def d2(x):
            ginv = chart.inverse_metric(x)
            dg = chart.partials_at(x)
            return -np.einsum("ia,qab,bj->qij", ginv, dg, ginv)
        return chart.inverse_metric, d2

    shape = (dim,) * r
    arr = np.empty(shape, dtype=object) if r else None
    consts = np.zeros(shape) if r else 0.0
    has_expr = False
    if r == 0:
        c, e = _coeff_entry(entry, coords, "symbol.coefficients.0")
        if e is None:
            return c, None
        return (lambda x, _e=e: _e.evaluate(
            {c_: float(x[k]) for k, c_ in enumerate(coords)})), None

    nested = np.array(entry, dtype=object)
    if nested.shape != shape:
        raise ConfigError(f"symbol.coefficients.{r}: expected nested lists "
                          f"of shape {shape}, got {nested.shape}")
    exprs = np.empty(shape, dtype=object)
    for idx in np.ndindex(shape):
        c, e = _coeff_entry(nested[idx], coords,
                            f"symbol.coefficients.{r}{list(idx)}")
        if e is None:
            consts[idx] = c
        else:
            exprs[idx] = e
            has_expr = True
    if not has_expr:
        return consts, None

    def coeff(x):
        env = {c_: float(x[k]) for k, c_ in enumerate(coords)}
        out = consts.copy()
        for idx in np.ndindex(shape):
            if exprs[idx] is not None:
                out[idx] = exprs[idx].evaluate(env)
        return out

    return coeff, None


def _build_symbol(spec, dim, chart):
    coords = _coords(dim)
    raw_coeffs = _require(spec, "coefficients", "symbol")
    if not isinstance(raw_coeffs, dict) or not raw_coeffs:
        raise ConfigError("symbol.coefficients must be a non-empty mapping "
                          "of order -> entry")
    try:
        orders = sorted(int(k) for k in raw_coeffs)
    except ValueError:
        raise ConfigError("symbol.coefficients keys must be integers") from None
    if orders[0] < 0:
        raise ConfigError("symbol.coefficients orders must be >= 0")
    degree = orders[-1]
    coeffs = [None] * (degree + 1)
    partials = {}
    for key, entry in raw_coeffs.items():
        r = int(key)
        coeff, dpart = _build_coefficient(r, entry, dim, chart, coords)
        coeffs[r] = coeff
        if dpart is not None:
            partials[r] = dpart
    if coeffs[0] is None:
        coeffs[0] = 0.0
    # expression coefficients fall back to finite differences for the
    # spatial derivative, so only pass analytic partials when every
    # x-dependent order has one
    x_dependent = [r for r in range(degree + 1) if callable(coeffs[r])]
    use_partials = partials if all(r in partials for r in x_dependent) \
        else None
    return PolySymbol(dim, coeffs, coeff_partials=use_partials,
                      name="config-symbol")


def _build_lagrangian(spec, dim):
    coords = _coords(dim)
    expr = _parse_field(_require(spec, "L", "lagrangian"), coords + ["v"],
                        "lagrangian.L")
    v_range = spec.get("v_range", [1e-2, 20.0])
    if len(v_range) != 2 or not v_range[0] < v_range[1]:
        raise ConfigError("lagrangian.v_range must be [lo, hi] with lo < hi")

    def l_fn(x, v):
        env = {c: float(x[k]) for k, c in enumerate(coords)}
        env["v"] = float(v)
        return expr.evaluate(env)

    return SphericalLagrangian.from_scalar(l_fn, tuple(v_range))


def _build_energy(spec, dim):
    coords = _coords(dim)
    expr = _parse_field(_require(spec, "W", "energy"), coords + ["u"],
                        "energy.W")
    eps = float(spec.get("epsilon", 1.0))
    if eps not in (-1.0, 1.0):
        raise ConfigError("energy.epsilon must be +1 or -1")

    def w_fn(x, u):
        env = {c: float(x[k]) for k, c in enumerate(coords)}
        env["u"] = float(u)
        return expr.evaluate(env)

    return energy_from_function(w_fn, epsilon=eps)


def _build_h(spec):
    kind = _require(spec, "kind", "h")
    if kind == "zero":
        return lambda w: 0.0
    if kind == "identity":
        return lambda w: w
    if kind == "linear":
        slope = float(spec.get("slope", 1.0))
        intercept = float(spec.get("intercept", 0.0))
        return lambda w: slope * w + intercept
    if kind == "expression":
        expr = _parse_field(_require(spec, "expr", "h"), ["w"], "h.expr")
        return lambda w: expr.evaluate({"w": float(w)})
    raise ConfigError(f"h.kind must be zero|identity|linear|expression, "
                      f"got {kind!r}")


def _front_samples(spec, axes):
    samples = _require(spec, "samples", "front")
    if isinstance(samples, int):
        samples = [samples] * axes
    if len(samples) != axes or any(int(s) < 2 for s in samples):
        raise ConfigError(f"front.samples needs {axes} counts >= 2")
    return [int(s) for s in samples]


def build_front_mesh(sim: SimConfig):
    """Construct the FrontMesh described by the validated config."""
    spec = sim.front_spec
    chart = sim.chart
    family = spec["family"]
    axes = chart.dim - 1
    seed = np.asarray(_require(spec, "orient_seed", "front"), dtype=float)
    if seed.size != chart.dim:
        raise ConfigError(f"front.orient_seed needs {chart.dim} components")
    phase0 = float(spec.get("phase0", 0.0))

    periodic = ()
    if family == "circle":
        if chart.dim != 2:
            raise ConfigError("circle front needs a 2-dimensional chart")
        samples = _front_samples(spec, 1)
        embed = circle_embedding(tuple(spec.get("center", (0.0, 0.0))),
                                 float(spec.get("radius", 1.0)))
        params = circle_params(samples[0])
        periodic = (True,)
    elif family == "segment":
        samples = _front_samples(spec, 1)
        embed = segment_embedding(_require(spec, "start", "front"),
                                  _require(spec, "end", "front"))
        params = [np.linspace(0.0, 1.0, samples[0])]
    elif family == "latitude":
        if chart.name != "sphere":
            raise ConfigError("latitude front needs the sphere chart")
        samples = _front_samples(spec, 1)
        embed = latitude_embedding(float(_require(spec, "theta0", "front")))
        params = circle_params(samples[0])
        periodic = (True,)
    elif family == "plane":
        samples = _front_samples(spec, axes)
        spans = _require(spec, "spans", "front")
        ranges = _require(spec, "ranges", "front")
        if len(spans) != axes or len(ranges) != axes:
            raise ConfigError(f"front.plane needs {axes} spans and ranges")
        embed = plane_embedding(_require(spec, "origin", "front"), spans)
        params = [np.linspace(float(r[0]), float(r[1]), m)
                  for r, m in zip(ranges, samples)]
    else:  # expression
        coords = [f"t{i + 1}" for i in range(axes)]
        entries = _require(spec, "embed", "front")
        if len(entries) != chart.dim:
            raise ConfigError(f"front.embed needs {chart.dim} expressions")
        exprs = [_parse_field(src, coords, f"front.embed[{i}]")
                 for i, src in enumerate(entries)]
        ranges = _require(spec, "ranges", "front")
        samples = _front_samples(spec, axes)

        def embed(*taus):
            env = {c: float(t) for c, t in zip(coords, taus)}
            return np.array([e.evaluate(env) for e in exprs])

        params = [np.linspace(float(r[0]), float(r[1]), m)
                  for r, m in zip(ranges, samples)]
        periodic = tuple(bool(b) for b in spec.get("periodic",
                                                   [False] * axes))

    return build_front(chart, embed, params, seed, s0=phase0,
                       periodic=periodic)


def validate(raw):
    """Validate a raw config dict and build the run objects."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    dim = int(_require(raw, "dim"))
    if dim < 2:
        raise ConfigError("dim must be >= 2")
    chart = _build_chart(_require(raw, "chart"), dim)

    sources = [k for k in ("symbol", "lagrangian", "energy") if k in raw]
    if len(sources) != 1:
        raise ConfigError("exactly one of symbol, lagrangian, energy must "
                          f"be given (found {sources or 'none'})")
    source_kind = sources[0]
    symbol = lagrangian = energy = None
    if source_kind == "symbol":
        symbol = _build_symbol(raw["symbol"], dim, chart)
    elif source_kind == "lagrangian":
        lagrangian = _build_lagrangian(raw["lagrangian"], dim)
    else:
        energy = _build_energy(raw["energy"], dim)

    flow_spec = _require(raw, "flow")
    form = _require(flow_spec, "form", "flow")
    if form not in _FORMS:
        raise ConfigError(f"flow.form must be one of {_FORMS}, got {form!r}")
    if form in ("hamilton", "modified") and source_kind != "symbol":
        raise ConfigError(f"flow.form {form!r} needs a symbol source")

    h_fn = None
    if "h" in raw:
        if form != "newtonian":
            raise ConfigError("h is only meaningful for the newtonian form")
        h_fn = _build_h(raw["h"])

    t_end = float(_require(flow_spec, "t_end", "flow"))
    snapshot_times = [float(t) for t in flow_spec.get("snapshot_times", [])]
    if any(t < 0 or t > t_end + 1e-12 for t in snapshot_times):
        raise ConfigError("snapshot_times must lie within [0, t_end]")
    try:
        stepper = StepperConfig(
            t_end=t_end,
            dt=float(flow_spec.get("dt", 1e-3)),
            method=str(flow_spec.get("method", "rk4")),
            atol=float(flow_spec.get("atol", 1e-10)),
            rtol=float(flow_spec.get("rtol", 1e-8)),
            record_every=int(flow_spec.get("record_every", 1)))
    except Exception as exc:
        raise ConfigError(f"flow: {exc}") from None

    front_spec = dict(_require(raw, "front"))
    family = _require(front_spec, "family", "front")
    if family not in _FRONT_FAMILIES:
        raise ConfigError(f"front.family must be one of {_FRONT_FAMILIES}, "
                          f"got {family!r}")
    branch = front_spec.get("branch", "positive")
    if branch not in ("positive", "negative", "nearest"):
        raise ConfigError("front.branch must be positive|negative|nearest")
    if branch == "nearest" and "branch_guess" not in front_spec:
        raise ConfigError("front.branch 'nearest' needs branch_guess")

    output = raw.get("output", {})
    formats = list(output.get("formats", list(_FORMATS)))
    for fmt in formats:
        if fmt not in _FORMATS:
            raise ConfigError(f"output.formats entries must be in "
                              f"{_FORMATS}, got {fmt!r}")

    return SimConfig(raw=raw, dim=dim, chart=chart, source_kind=source_kind,
                     symbol=symbol, lagrangian=lagrangian, energy=energy,
                     h=h_fn, front_spec=front_spec, flow_form=form,
                     stepper=stepper, snapshot_times=snapshot_times,
                     formats=formats)
