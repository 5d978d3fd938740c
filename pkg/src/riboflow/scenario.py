"""Scenario files: a single JSON document describing a model, its rates,
initial states, solver settings and one analysis to run.

See ``docs/scenario_format.md`` for the schema.
"""

import json
import math
import os
import platform
import re
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .crn import assign_crn, deficiency_terms, enumerate_siphons
from .errors import (
    BadParameter,
    ParseError,
    RiboflowError,
    TooLarge,
    ValidationError,
)
from .graph import CompartmentalModel, build_model, connectivity, count_chordless_cycles, cyclomatic_number
from .longtime import classify_nsc_limit, entrainment_analysis, equilibrium_curve, find_equilibrium
from .lyapunov import LyapunovSpec, lyapunov_profile, manifold_surface, surface_csv
from .rates import DenominatorPoly, RateSpec, TimeCoefficient, Transform, make_kinetics
from .simulator import (
    RateNetwork,
    SimOptions,
    conservation_report,
    csv_text,
    graded_grid,
    persistence_margin,
    simulate_full,
    simulate_reduced,
)

SCHEMA_VERSION = 1
ANALYSES = ("analyze", "simulate", "equilibria", "entrain", "lyapunov")

# default options per analysis; values of None are filled from the model
DEFAULT_OPTIONS: Dict[str, Dict[str, Any]] = {
    "analyze": {"cycle_budget": 10**6, "max_siphon_species": 16},
    "simulate": {"system": "both", "tau": 0.5, "compare_nominal": False, "reduction_tol": None, "drift_tol": 1e-8},
    "equilibria": {"r_grid": None, "ensemble_levels": None, "ensemble_count": 5, "tol": 1e-9, "agree_tol": 1e-6},
    "entrain": {"n_periods": 40, "samples_per_period": 256, "period": None, "burn_in": 3, "tol": 1e-4},
    "lyapunov": {
        "members": None,
        "reference": "equilibrium",
        "surface": None,
        "decrease_tol": 1e-9,
        "chain_rule_tol": 1e-6,
        "chain_rule_threshold": 1e-6,
    },
}


@dataclass
class InitialSpec:
    """Explicit states, or a level with a rule: ``proportional`` (one state,
    ``n_i = r c_i / c``) or ``random`` (``count`` states, seeded)."""

    states: Optional[Tuple[Tuple[float, ...], ...]] = None
    level: Optional[float] = None
    rule: str = "proportional"
    count: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        if self.states is not None:
            return {"states": [list(s) for s in self.states]}
        return {"level": self.level, "rule": self.rule, "count": self.count, "seed": self.seed}


@dataclass
class GridSpec:
    kind: str = "uniform"
    first: Optional[float] = None
    per_decade: Optional[int] = None

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform"}
        return {"kind": self.kind, "first": self.first, "per_decade": self.per_decade}


@dataclass
class Scenario:
    name: str
    model: CompartmentalModel
    rates: Tuple[RateSpec, ...]
    initial: InitialSpec
    analysis: str
    options: Dict[str, Any] = field(default_factory=dict)
    solver: SimOptions = field(default_factory=SimOptions)
    grid: GridSpec = field(default_factory=GridSpec)
    description: str = ""

    def network(self) -> RateNetwork:
        return RateNetwork(self.model, self.rates)

    def output_grid(self) -> Optional[np.ndarray]:
        if self.grid.kind == "uniform":
            return None
        return graded_grid(self.solver.t_end, self.solver.dense_output_stride, self.grid.first, self.grid.per_decade)

    def options_for(self, kind: str) -> Dict[str, Any]:
        """Options for ``kind``: the scenario's own when it matches, defaults otherwise."""
        opts = dict(DEFAULT_OPTIONS[kind])
        if kind == self.analysis:
            opts.update(self.options)
        return opts


# ---------------------------------------------------------------------------
# parsing


class _Ctx:
    """Path-tracking accessor so validation errors name the offending field."""

    def __init__(self, data, path="$"):
        self.data = data
        self.path = path

    def fail(self, msg, key=None):
        where = self.path if key is None else f"{self.path}.{key}"
        raise ValidationError(f"{where}: {msg}")

    def obj(self):
        if not isinstance(self.data, dict):
            self.fail("expected an object")
        return self

    def get(self, key, default=...):
        if key not in self.data:
            if default is ...:
                self.fail("missing required field", key)
            return default
        return self.data[key]

    def sub(self, key):
        return _Ctx(self.get(key), f"{self.path}.{key}")

    def num(self, key, default=..., positive=False):
        v = self.get(key, default)
        if v is None and default is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(f"expected a finite number, got {v!r}", key)
        if positive and not v > 0:
            self.fail(f"must be positive, got {v}", key)
        return v

    def only(self, allowed):
        extra = set(self.data) - set(allowed)
        if extra:
            self.fail(f"unknown fields {sorted(extra)}")


def _merge(defaults: dict, rate: dict) -> dict:
    out = dict(defaults)
    out.update(rate)
    return out


def _parse_rate(d: dict, path: str, m: int) -> RateSpec:
    ctx = _Ctx(d, path).obj()
    ctx.only({"edge", "k", "theta", "nu", "psi", "kinetics"})
    edge = ctx.get("edge")
    if not (isinstance(edge, list) and len(edge) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in edge)):
        ctx.fail("edge must be a pair of integers", "edge")
    try:
        k = TimeCoefficient.from_dict(ctx.get("k"))
        if "kinetics" in d:
            if any(f in d for f in ("theta", "nu", "psi")):
                ctx.fail("give either kinetics or theta/nu/psi, not both")
            kin = _Ctx(d["kinetics"], f"{path}.kinetics").obj()
            kin.only({"name", "l", "L", "a", "b"})
            params = {p: kin.num(p) for p in ("l", "L", "a", "b") if p in kin.data}
            return make_kinetics(kin.get("name"), k, tuple(edge), m=m, **params)
        return RateSpec(
            tuple(edge),
            k,
            Transform.from_dict(d.get("theta", {"kind": "identity"})),
            Transform.from_dict(d.get("nu", {"kind": "identity"})),
            DenominatorPoly.from_terms(d.get("psi", [])),
        )
    except ValidationError as exc:
        if str(exc).startswith(path):
            raise
        raise type(exc)(f"{path}: {exc}") from None
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed rate ({exc})") from None


def _parse_model(ctx: _Ctx) -> CompartmentalModel:
    ctx.obj().only({"m", "transitions", "capacities"})
    m = ctx.get("m")
    trans = ctx.get("transitions")
    caps = ctx.get("capacities")
    if not isinstance(trans, list) or not all(isinstance(e, list) for e in trans):
        ctx.fail("transitions must be a list of [i, j] pairs", "transitions")
    if not isinstance(caps, list):
        ctx.fail("capacities must be a list", "capacities")
    try:
        return build_model(m, [tuple(e) for e in trans], caps)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise type(exc)(f"{ctx.path}: {exc}") from None
        raise ValidationError(f"{ctx.path}: {exc}") from None


def _parse_initial(ctx: _Ctx, model: CompartmentalModel) -> InitialSpec:
    ctx.obj().only({"states", "level", "rule", "count", "seed"})
    d = ctx.data
    if "states" in d:
        states = d["states"]
        if not isinstance(states, list) or not states:
            ctx.fail("states must be a nonempty list of state vectors", "states")
        out = []
        for k, st in enumerate(states):
            if not isinstance(st, list) or len(st) != model.m:
                ctx.fail(f"state {k} must have {model.m} entries", "states")
            x = np.asarray(st, dtype=float)
            if not np.all(np.isfinite(x)) or np.any(x < 0) or np.any(x > model.c):
                ctx.fail(f"state {k} lies outside the capacity box", "states")
            out.append(tuple(float(v) for v in st))
        return InitialSpec(states=tuple(out))
    level = ctx.num("level")
    if not 0 <= level <= model.total_capacity:
        ctx.fail(f"level {level} outside [0, {model.total_capacity}]", "level")
    rule = ctx.get("rule", "proportional")
    if rule not in ("proportional", "random"):
        ctx.fail(f"unknown rule {rule!r}", "rule")
    count = ctx.get("count", 1)
    seed = ctx.get("seed", 0)
    if not isinstance(count, int) or count < 1:
        ctx.fail("count must be a positive integer", "count")
    if not isinstance(seed, int):
        ctx.fail("seed must be an integer", "seed")
    return InitialSpec(level=float(level), rule=rule, count=count, seed=seed)


def _parse_solver(ctx: _Ctx) -> Tuple[SimOptions, GridSpec]:
    ctx.obj().only({"method", "rel_tol", "abs_tol", "max_step", "t_end", "dense_output_stride", "grid"})
    d = ctx.data
    kw = {}
    for key in ("rel_tol", "abs_tol", "t_end", "dense_output_stride"):
        if key in d:
            kw[key] = float(ctx.num(key))
    if d.get("max_step") is not None:
        kw["max_step"] = float(ctx.num("max_step", positive=True))
    if "method" in d:
        kw["method"] = d["method"]
    try:
        opts = SimOptions(**kw)
    except ValidationError as exc:
        raise ValidationError(f"{ctx.path}: {exc}") from None
    grid = GridSpec()
    if "grid" in d:
        g = ctx.sub("grid").obj()
        g.only({"kind", "first", "per_decade"})
        kind = g.get("kind", "uniform")
        if kind == "graded":
            per = g.get("per_decade")
            if not isinstance(per, int) or per < 1:
                g.fail("per_decade must be a positive integer", "per_decade")
            grid = GridSpec("graded", float(g.num("first", positive=True)), per)
        elif kind != "uniform":
            g.fail(f"unknown grid kind {kind!r}", "kind")
    return opts, grid


def _parse_options(ctx: _Ctx, kind: str) -> Dict[str, Any]:
    ctx.obj().only(set(DEFAULT_OPTIONS[kind]))
    opts = dict(ctx.data)
    if kind == "lyapunov" and opts.get("members") is not None:
        members = []
        for k, md in enumerate(opts["members"]):
            try:
                members.append(LyapunovSpec.from_dict(md))
            except (ValidationError, TypeError) as exc:
                raise ValidationError(f"{ctx.path}.members[{k}]: {exc}") from None
        opts["members"] = members
    return opts


def scenario_from_dict(data: dict) -> Scenario:
    ctx = _Ctx(data).obj()
    ctx.only({"schema_version", "name", "description", "model", "rate_defaults", "rates", "initial", "solver", "analysis"})
    version = ctx.get("schema_version")
    if version != SCHEMA_VERSION:
        ctx.fail(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})", "schema_version")
    model = _parse_model(ctx.sub("model"))
    defaults = ctx.get("rate_defaults", {})
    if not isinstance(defaults, dict):
        ctx.fail("rate_defaults must be an object", "rate_defaults")
    raw_rates = ctx.get("rates")
    if not isinstance(raw_rates, list):
        ctx.fail("rates must be a list", "rates")
    rates = tuple(_parse_rate(_merge(defaults, r) if isinstance(r, dict) else r, f"$.rates[{k}]", model.m) for k, r in enumerate(raw_rates))
    try:
        RateNetwork(model, rates)
    except ValidationError as exc:
        raise ValidationError(f"$.rates: {exc}") from None
    initial = _parse_initial(ctx.sub("initial"), model)
    solver, grid = _parse_solver(ctx.sub("solver")) if "solver" in data else (SimOptions(), GridSpec())
    an = ctx.sub("analysis").obj()
    an.only({"kind", "options"})
    kind = an.get("kind")
    if kind not in ANALYSES:
        an.fail(f"unknown analysis {kind!r}; expected one of {list(ANALYSES)}", "kind")
    options = _parse_options(an.sub("options"), kind) if "options" in an.data else {}
    name = ctx.get("name", "scenario")
    return Scenario(name, model, rates, initial, kind, options, solver, grid, ctx.get("description", ""))


def parse_scenario_text(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return scenario_from_dict(data)


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario_text(text)


# ---------------------------------------------------------------------------
# emitting


def _options_to_json(opts: Dict[str, Any]) -> Dict[str, Any]:
    out = {}
    for k, v in opts.items():
        if k == "members" and v is not None:
            v = [s.to_dict() for s in v]
        out[k] = v
    return out


def scenario_to_dict(sc: Scenario) -> dict:
    rates = [r.to_dict() for r in sc.rates]
    defaults = {}
    # factor out transforms shared by every rate to keep large files readable
    for key in ("theta", "nu", "psi"):
        vals = [json.dumps(r[key], sort_keys=True) for r in rates]
        if rates and len(set(vals)) == 1:
            defaults[key] = rates[0][key]
            for r in rates:
                del r[key]
    solver = {
        "method": sc.solver.method,
        "rel_tol": sc.solver.rel_tol,
        "abs_tol": sc.solver.abs_tol,
        "t_end": sc.solver.t_end,
        "dense_output_stride": sc.solver.dense_output_stride,
    }
    if math.isfinite(sc.solver.max_step):
        solver["max_step"] = sc.solver.max_step
    if sc.grid.kind != "uniform":
        solver["grid"] = sc.grid.to_dict()
    out = {
        "schema_version": SCHEMA_VERSION,
        "name": sc.name,
        "description": sc.description,
        "model": {"m": sc.model.m, "transitions": [list(e) for e in sc.model.transitions], "capacities": list(sc.model.capacities)},
    }
    if defaults:
        out["rate_defaults"] = defaults
    out["rates"] = rates
    out["initial"] = sc.initial.to_dict()
    out["solver"] = solver
    out["analysis"] = {"kind": sc.analysis, "options": _options_to_json(sc.options)}
    return out


_SCALAR_ARRAY = re.compile(r"\[\s*([^\[\]{}\"]*?)\s*\]")


def _compact(text: str) -> str:
    # keep arrays of numbers on one line
    return _SCALAR_ARRAY.sub(lambda mt: "[" + re.sub(r",\s+", ", ", mt.group(1)) + "]", text)


def emit_scenario(sc: Scenario, path=None) -> str:
    text = _compact(json.dumps(scenario_to_dict(sc), indent=1)) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# running


def random_states_on_level(c: np.ndarray, r: float, count: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Random points of the level set ``sum(n) = r`` inside the box ``[0, c]``.

    A Dirichlet draw is scaled to ``r``; overflow above capacity is handed to
    the compartments that still have room, in proportion to their weights.
    """
    out = []
    for _ in range(count):
        w = rng.dirichlet(np.ones(len(c)))
        x = np.zeros(len(c))
        rest = r
        free = np.ones(len(c), dtype=bool)
        while rest > 1e-12 * max(1.0, r) and np.any(free):
            share = w * free
            share = share / share.sum() * rest
            room = c - x
            take = np.minimum(share, room)
            x += take
            rest -= take.sum()
            free &= x < c
        x *= r / x.sum() if x.sum() > 0 else 1.0
        out.append(np.minimum(x, c))
    return out


def initial_states(sc: Scenario, seed: Optional[int] = None) -> List[np.ndarray]:
    ini = sc.initial
    if ini.states is not None:
        return [np.array(s) for s in ini.states]
    c = sc.model.c
    if ini.rule == "proportional":
        return [ini.level * c / c.sum()]
    rng = np.random.default_rng(ini.seed if seed is None else seed)
    return random_states_on_level(c, ini.level, ini.count, rng)


@dataclass
class RunReport:
    exit_code: int
    manifest: Dict[str, Any]
    artifacts: List[str]

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.manifest.get("checks", {}).values())


def _check(checks: dict, name: str, value, threshold, ok: bool):
    checks[name] = {"value": _jsonable(value), "threshold": threshold, "pass": bool(ok)}


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, frozenset):
        return sorted(v)
    return v


class _Writer:
    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.files: List[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def write(self, name: str, text: str):
        with open(os.path.join(self.out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.files.append(name)


def _run_analyze(sc: Scenario, opts, w: _Writer, checks, results):
    model = sc.model
    conn = connectivity(model)
    crn = assign_crn(model)
    terms = deficiency_terms(crn)
    cycles = count_chordless_cycles(model, int(opts["cycle_budget"]))
    n_und = len(model.undirected_edges)
    results.update(
        m=model.m,
        transitions=len(model.transitions),
        undirected_edges=n_und,
        complexes=terms.complexes,
        linkage_classes=terms.linkage_classes,
        stoichiometric_rank=terms.rank,
        deficiency_rank=terms.value,
        deficiency_cycles=cycles,
        cyclomatic_number=cyclomatic_number(model),
        strongly_connected=conn.strongly_connected,
        weakly_reversible=conn.weakly_reversible,
        components=[sorted(c) for c in conn.condensation.components],
        component_labels=list(conn.condensation.labels),
    )
    _check(checks, "complexes_equal_twice_edges", terms.complexes, 2 * n_und, terms.complexes == 2 * n_und)
    _check(checks, "linkage_classes_equal_edges", terms.linkage_classes, n_und, terms.linkage_classes == n_und)
    _check(checks, "deficiency_rank_equals_chordless_cycles", [terms.value, cycles], "equal", terms.value == cycles)
    try:
        rep = enumerate_siphons(crn, int(opts["max_siphon_species"]))
        results["minimal_siphons"] = [sorted(s) for s in rep.siphons]
        results["siphon_witnesses"] = rep.witnesses
        if conn.strongly_connected:
            _check(checks, "siphon_characterization", rep.characterization_ok, True, rep.characterization_ok)
    except TooLarge as exc:
        results["minimal_siphons"] = f"skipped: {exc}"
    rows = [f"{k},{lab},{' '.join(map(str, sorted(comp)))}" for k, (comp, lab) in enumerate(zip(conn.condensation.components, conn.condensation.labels), 1)]
    w.write("condensation.csv", "component,label,vertices\n" + "".join(r + "\n" for r in rows))


def _nominal_rates(rates) -> Tuple[RateSpec, ...]:
    return tuple(RateSpec(r.edge, r.k.nominal(), r.theta, r.nu, r.psi) for r in rates)


def _run_simulate(sc: Scenario, opts, w: _Writer, checks, results, seed):
    net = sc.network()
    grid = sc.output_grid()
    system = opts["system"]
    if system not in ("reduced", "full", "both"):
        raise BadParameter(f"simulate.system must be reduced, full or both, got {system!r}")
    strongly = connectivity(sc.model).strongly_connected
    drift = []
    margins = []
    finals = []
    consistency = []
    nominal_gap = []
    for k, n0 in enumerate(initial_states(sc, seed), 1):
        trajs = []
        if system in ("reduced", "both"):
            tr = simulate_reduced(sc.model, net, n0, sc.solver, grid)
            w.write(f"trajectory_{k}.csv", tr.to_csv())
            trajs.append(tr)
        if system in ("full", "both"):
            tf = simulate_full(sc.model, net, n0, opts=sc.solver, grid=grid)
            w.write(f"trajectory_full_{k}.csv", tf.to_csv())
            trajs.append(tf)
        if system == "both":
            consistency.append(float(np.max(np.abs(trajs[0].n - trajs[1].n))))
        for tr in trajs:
            rep = conservation_report(tr)
            drift.append(max(rep.max_total_drift, rep.max_percompartment_drift))
        main = trajs[0]
        finals.append(main.final[: sc.model.m])
        interior = bool(np.all(n0 > 0) and np.all(n0 < sc.model.c))
        if strongly and interior and main.times[-1] >= opts["tau"]:
            margins.append(persistence_margin(main, opts["tau"]))
        if opts["compare_nominal"]:
            tn = simulate_reduced(sc.model, _nominal_rates(sc.rates), n0, sc.solver, grid)
            w.write(f"trajectory_nominal_{k}.csv", tn.to_csv())
            nominal_gap.append(float(np.max(np.abs(tn.final - main.final[: sc.model.m]))))
    results["final_states"] = finals
    _check(checks, "conservation_drift", max(drift), opts["drift_tol"], max(drift) <= opts["drift_tol"])
    if consistency:
        tol = opts["reduction_tol"]
        if tol is None:
            # two independent runs, each with global error growing past the local tolerance
            tol = 1e3 * max(sc.solver.rel_tol, sc.solver.abs_tol) * max(1.0, float(sc.model.c.max()))
        _check(checks, "reduced_vs_full", max(consistency), tol, max(consistency) <= tol)
    if margins:
        _check(checks, "persistence_margin", min(margins), "> 0", min(margins) > 0)
    if nominal_gap:
        _check(checks, "perturbed_vs_nominal_final", max(nominal_gap), 1e-4, max(nominal_gap) <= 1e-4)


def _grid_from(opt, total: float) -> np.ndarray:
    if opt is None:
        return np.linspace(0.0, total, 50)
    if isinstance(opt, dict):
        return np.linspace(float(opt["start"]), float(opt["stop"]), int(opt["num"]))
    return np.asarray(opt, dtype=float)


def _run_equilibria(sc: Scenario, opts, w: _Writer, checks, results, seed):
    net = sc.network()
    model = sc.model
    if not connectivity(model).strongly_connected:
        pred_rows, obs_rows, agree = [], [], []
        for k, n0 in enumerate(initial_states(sc, seed), 1):
            rep = classify_nsc_limit(model, net, n0)
            pred_rows.append(np.r_[k, rep.predicted_limit])
            obs_rows.append(np.r_[k, rep.observed_limit])
            agree.append(rep.agreement)
            results.setdefault("nsc", []).append(
                {
                    "level": float(np.sum(n0)),
                    "rule": rep.rule,
                    "predicted": rep.predicted_limit,
                    "observed": rep.observed_limit,
                    "filled": rep.filled,
                    "emptied": rep.emptied,
                    "residual_components": [sorted(c) for c in rep.residual_components],
                }
            )
        header = ["ic"] + [f"n_{i}" for i in range(1, model.m + 1)]
        w.write("nsc_predicted.csv", csv_text(header, np.array(pred_rows)))
        w.write("nsc_observed.csv", csv_text(header, np.array(obs_rows)))
        _check(checks, "nsc_prediction_agrees", agree, True, all(agree))
        return
    r_grid = _grid_from(opts["r_grid"], model.total_capacity)
    curve = equilibrium_curve(model, net, r_grid, opts["tol"])
    w.write("equilibrium_curve.csv", curve.to_csv())
    strict = curve.monotone(strict=True)
    _check(checks, "curve_strictly_increasing", strict, True, bool(np.all(strict)))
    lv = float(np.max(curve.level_errors()))
    _check(checks, "curve_level_closure", lv, 1e-8 * max(1.0, model.total_capacity), lv <= 1e-8 * max(1.0, model.total_capacity))
    results["curve_max_residual"] = float(np.max(curve.residuals))
    levels = opts["ensemble_levels"]
    if levels is None:
        levels = [0.25 * model.total_capacity, 0.5 * model.total_capacity, 0.75 * model.total_capacity]
    if levels:
        rng = np.random.default_rng(sc.initial.seed if seed is None else seed)
        rows = []
        worst = 0.0
        for r in levels:
            pts = []
            starts = random_states_on_level(model.c, float(r), int(opts["ensemble_count"]), rng)
            for k, x0 in enumerate(starts, 1):
                eq = find_equilibrium(model, net, float(r), opts["tol"], n0=x0)
                pts.append(eq.point)
                rows.append(np.r_[r, k, eq.point, eq.residual])
            for a in range(len(pts)):
                for b in range(a + 1, len(pts)):
                    worst = max(worst, float(np.abs(pts[a] - pts[b]).sum()))
        header = ["r", "ic"] + [f"n_{i}" for i in range(1, model.m + 1)] + ["residual"]
        w.write("equilibrium_ensemble.csv", csv_text(header, np.array(rows)))
        _check(checks, "multistart_agreement_l1", worst, opts["agree_tol"], worst <= opts["agree_tol"])


def _run_entrain(sc: Scenario, opts, w: _Writer, checks, results, seed):
    net = sc.network()
    ens = initial_states(sc, seed)
    est = entrainment_analysis(
        sc.model,
        net,
        ens,
        int(opts["n_periods"]),
        int(opts["samples_per_period"]),
        sc.solver,
        opts["period"],
    )
    w.write("orbit.csv", est.to_csv())
    p = np.arange(1, len(est.l1_history) + 1)
    w.write("periodicity.csv", csv_text(["period", "l1"], np.column_stack([p, est.l1_history])))
    p = np.arange(1, len(est.ic_spread_history) + 1)
    w.write("spread.csv", csv_text(["period", "spread"], np.column_stack([p, est.ic_spread_history])))
    results["period"] = est.period
    tol = opts["tol"]
    _check(checks, "final_periodicity_residual", est.periodicity_residual, tol, est.periodicity_residual < tol)
    if len(ens) > 1:
        _check(checks, "final_ensemble_spread", est.spread, tol, est.spread < tol)
    frac = est.increase_fraction(int(opts["burn_in"]))
    _check(checks, "residual_increase_fraction", frac, 0.05, frac <= 0.05)
    level = np.array([row.sum() for row in est.samples])
    closure = float(np.max(np.abs(level - ens[0].sum()))) / max(1.0, ens[0].sum())
    _check(checks, "orbit_level_closure", closure, 1e-8, closure <= 1e-8)


def _run_lyapunov(sc: Scenario, opts, w: _Writer, checks, results, seed):
    net = sc.network()
    members = opts["members"] or [LyapunovSpec.ltv()]
    results["members"] = [s.name for s in members]
    worst_dv = -math.inf
    worst_cr = 0.0
    grid = sc.output_grid()
    for k, n0 in enumerate(initial_states(sc, seed), 1):
        ref = opts["reference"]
        if ref == "equilibrium":
            nbar = find_equilibrium(sc.model, net, float(np.sum(n0))).point
        else:
            nbar = np.asarray(ref, dtype=float)
        results.setdefault("references", []).append(nbar)
        tr = simulate_reduced(sc.model, net, n0, sc.solver, grid)
        for j, spec in enumerate(members, 1):
            prof = lyapunov_profile(tr, spec, nbar, net)
            w.write(f"lyapunov_{k}_{j}.csv", prof.to_csv())
            worst_dv = max(worst_dv, prof.max_interior_derivative())
            worst_cr = max(worst_cr, prof.chain_rule_mismatch(opts["chain_rule_threshold"]))
            surf = opts["surface"]
            if surf is not None and k == 1:
                g1 = np.linspace(*surf["n1"][:2], int(surf["n1"][2]))
                g2 = np.linspace(*surf["n2"][:2], int(surf["n2"][2]))
                rows = manifold_surface(spec, nbar, float(np.sum(n0)), sc.model.c, g1, g2)
                w.write(f"surface_{j}.csv", surface_csv(rows))
    _check(checks, "max_interior_dVdt", worst_dv, opts["decrease_tol"], worst_dv <= opts["decrease_tol"])
    _check(checks, "chain_rule_relative_gap", worst_cr, opts["chain_rule_tol"], worst_cr <= opts["chain_rule_tol"])


_RUNNERS = {
    "analyze": lambda sc, o, w, c, r, s: _run_analyze(sc, o, w, c, r),
    "simulate": _run_simulate,
    "equilibria": _run_equilibria,
    "entrain": _run_entrain,
    "lyapunov": _run_lyapunov,
}


def run_scenario(sc: Scenario, out_dir, analysis: Optional[str] = None, seed: Optional[int] = None) -> RunReport:
    """Run one analysis, write its CSV files and ``manifest.json`` into ``out_dir``.

    Library errors propagate; the CLI maps them to exit codes.
    """
    kind = analysis or sc.analysis
    if kind not in ANALYSES:
        raise ValidationError(f"unknown analysis {kind!r}")
    opts = sc.options_for(kind)
    w = _Writer(out_dir)
    checks: Dict[str, Any] = {}
    results: Dict[str, Any] = {}
    start = time.perf_counter()
    _RUNNERS[kind](sc, opts, w, checks, results, seed)
    wall = time.perf_counter() - start
    manifest = {
        "scenario": sc.name,
        "analysis": kind,
        "riboflow_version": __version__,
        "python": platform.python_version(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_time_s": wall,
        "seed": seed,
        "tolerances": {"rel_tol": sc.solver.rel_tol, "abs_tol": sc.solver.abs_tol},
        "inputs": scenario_to_dict(sc),
        "options": _options_to_json(opts),
        "results": _jsonable_tree(results),
        "checks": checks,
        "all_checks_passed": all(c["pass"] for c in checks.values()),
        "artifacts": sorted(w.files),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return RunReport(0, manifest, sorted(w.files))


def _jsonable_tree(v):
    if isinstance(v, dict):
        return {k: _jsonable_tree(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable_tree(x) for x in v]
    return _jsonable(v)


def error_exit_code(exc: BaseException) -> int:
    if isinstance(exc, RiboflowError):
        return exc.exit_code
    return 4
