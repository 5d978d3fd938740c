"""Long-horizon behaviour: equilibria per level set, limits of models that are
not strongly connected, and entrainment to periodic forcing."""

import itertools
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    LevelSetMismatch,
    MixedPeriods,
    NoConvergence,
    NotStronglyConnected,
    ValidationError,
)
from .graph import CompartmentalModel, condensation, connectivity
from .rates import DenominatorPoly, RateSpec
from .simulator import RateNetwork, SimOptions, Trajectory, csv_text, simulate_reduced

# options for the convergence phase of the equilibrium solver; only the endpoint matters
_SETTLE = SimOptions(rel_tol=1e-9, abs_tol=1e-11)


def _network(model, rates) -> RateNetwork:
    return rates if isinstance(rates, RateNetwork) else RateNetwork(model, rates)


def _require_time_invariant(net: RateNetwork):
    varying = [sp.edge for sp in net.specs if not sp.k.is_constant]
    if varying:
        raise ValidationError(f"rates must be time-invariant; edges {varying} have time-varying coefficients")


def _flux_scale(net: RateNetwork, n: np.ndarray) -> float:
    return float(np.max(net.flux(n, net.c - n, 0.0), initial=0.0))


def _jacobian(f, x: np.ndarray) -> np.ndarray:
    m = len(x)
    jac = np.empty((m, m))
    for k in range(m):
        h = 1e-6 * max(1.0, abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        jac[:, k] = (f(xp) - f(xm)) / (2 * h)
    return jac


def newton_on_level(f, x0: np.ndarray, r: float, c: np.ndarray, tol: float, max_iter: int = 60) -> Tuple[np.ndarray, float, bool]:
    """Damped Newton for ``f(x) = 0`` restricted to ``sum(x) = r``.

    Returns ``(x, ||f(x)||_inf, converged)``; iterates never leave the box.
    """
    x = np.clip(np.asarray(x0, dtype=float), 0.0, c)
    m = len(x)

    def resid(y):
        return np.concatenate([f(y), [y.sum() - r]])

    g = resid(x)
    gnorm = np.linalg.norm(g)
    for _ in range(max_iter):
        if np.max(np.abs(g[:m])) <= tol and abs(g[m]) <= 1e-12 * max(1.0, r):
            return x, float(np.max(np.abs(g[:m]))), True
        jac = np.vstack([_jacobian(f, x), np.ones((1, m))])
        step = np.linalg.lstsq(jac, -g, rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            y = x + lam * step
            if np.all(y >= -1e-12 * c) and np.all(y <= c * (1 + 1e-12)):
                y = np.clip(y, 0.0, c)
                gy = resid(y)
                if np.linalg.norm(gy) < gnorm:
                    break
            lam /= 2
        else:
            break
        if np.max(np.abs(y - x)) <= 4 * np.finfo(float).eps * max(1.0, np.max(np.abs(x))):
            x, g, gnorm = y, gy, np.linalg.norm(gy)
            break
        x, g, gnorm = y, gy, np.linalg.norm(gy)
    res = float(np.max(np.abs(g[:m])))
    return x, res, res <= tol


@dataclass
class Equilibrium:
    point: np.ndarray
    residual: float
    level: float


def _accept_tol(tol: float, scale: float) -> float:
    # relative to the largest flux; slow kinetics must not loosen the point
    return tol * scale if scale > 0 else tol


def find_equilibrium(
    model: CompartmentalModel,
    rates,
    r: float,
    tol: float = 1e-9,
    n0=None,
    max_horizon: float = 1e5,
    first_chunk: float = 1.0,
) -> Equilibrium:
    """Equilibrium on the level set ``sum(n) = r`` of a strongly connected,
    time-invariant model.

    Simulates from ``n0`` (default: ``n_i = r c_i / c``) in growing chunks,
    then polishes with damped Newton on the level set. ``tol`` bounds the
    vector field norm relative to the largest transition flux.
    """
    net = _network(model, rates)
    if not connectivity(model).strongly_connected:
        raise NotStronglyConnected("find_equilibrium needs a strongly connected model; use classify_nsc_limit")
    _require_time_invariant(net)
    c = model.c
    total = c.sum()
    if not -1e-12 * total <= r <= total * (1 + 1e-12):
        raise ValidationError(f"level {r} outside [0, {total}]")
    r = min(max(r, 0.0), total)
    if r == 0.0:
        return Equilibrium(np.zeros(model.m), 0.0, 0.0)
    if r == total:
        return Equilibrium(c.copy(), float(np.max(np.abs(net.reduced_rhs(0.0, c)))), r)

    if n0 is None:
        x = r * c / total
    else:
        x = np.asarray(n0, dtype=float)
        if abs(x.sum() - r) > 1e-9 * max(1.0, r):
            raise LevelSetMismatch(f"initial state has total {x.sum()}, expected {r}")

    def f(y):
        return net.reduced_rhs(0.0, y)

    horizon = 0.0
    chunk = first_chunk
    while True:
        scale = _flux_scale(net, x)
        fx = np.max(np.abs(f(x)))
        if fx <= 1e-3 * max(scale, 1e-300) or horizon >= max_horizon:
            y, res, ok = newton_on_level(f, x, r, c, _accept_tol(tol, _flux_scale(net, x)))
            if ok:
                return Equilibrium(y, res, r)
            if horizon >= max_horizon:
                raise NoConvergence(f"no equilibrium found on level {r} within horizon {max_horizon} (residual {res:.3g})")
        opts = _SETTLE.replace(t_end=chunk, dense_output_stride=chunk)
        x = simulate_reduced(model, net, x, opts).final
        horizon += chunk
        chunk = min(2 * chunk, max_horizon)


@dataclass
class EquilibriumCurve:
    r_grid: np.ndarray
    points: np.ndarray
    residuals: np.ndarray

    def monotone(self, strict: bool = False) -> np.ndarray:
        """Per coordinate: nondecreasing (or strictly increasing) along the grid."""
        d = np.diff(self.points, axis=0)
        return np.all(d > 0, axis=0) if strict else np.all(d >= 0, axis=0)

    def level_errors(self) -> np.ndarray:
        return np.abs(self.points.sum(axis=1) - self.r_grid)

    def to_csv(self, path=None) -> str:
        m = self.points.shape[1]
        header = ["r"] + [f"e_{i}" for i in range(1, m + 1)] + ["residual"]
        text = csv_text(header, np.column_stack([self.r_grid, self.points, self.residuals]))
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def equilibrium_curve(model: CompartmentalModel, rates, r_grid: Sequence[float], tol: float = 1e-9) -> EquilibriumCurve:
    """Equilibria along increasing levels, warm-starting each solve from the previous point."""
    net = _network(model, rates)
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r_grid) <= 0):
        raise ValidationError("r_grid must be strictly increasing")
    c = model.c
    points = np.empty((len(r_grid), model.m))
    residuals = np.empty(len(r_grid))
    prev: Optional[Equilibrium] = None
    for k, r in enumerate(r_grid):
        eq = None
        if prev is not None and 0 < r < c.sum():
            guess = np.clip(prev.point + (r - prev.level) * c / c.sum(), 0.0, c)
            f = lambda y: net.reduced_rhs(0.0, y)
            y, res, ok = newton_on_level(f, guess, r, c, _accept_tol(tol, _flux_scale(net, guess)))
            if ok and np.all(y >= prev.point - 1e-12 * c):
                eq = Equilibrium(y, res, r)
        if eq is None:
            eq = find_equilibrium(model, net, r, tol)
        points[k] = eq.point
        residuals[k] = eq.residual
        prev = eq
    return EquilibriumCurve(r_grid, points, residuals)


# ---------------------------------------------------------------------------
# models that are not strongly connected


def restrict_rates(rates: Sequence[RateSpec], keep: Sequence[int]) -> List[RateSpec]:
    """Rates of the edges inside ``keep`` (1-based labels), relabelled to 1..len(keep)."""
    relabel = {v: k + 1 for k, v in enumerate(keep)}
    idx = [v - 1 for v in keep]
    out = []
    for sp in rates:
        i, j = sp.edge
        if i not in relabel or j not in relabel:
            continue
        psi = sp.psi
        if not psi.is_zero:
            terms = []
            for alpha, r1, r2 in psi.terms:
                outside = [q for q in range(len(r1)) if q not in idx and (r1[q] or r2[q])]
                if outside:
                    raise ValidationError(f"Psi of edge {sp.edge} depends on compartments outside {list(keep)}")
                terms.append((alpha, tuple(r1[q] for q in idx), tuple(r2[q] for q in idx)))
            psi = DenominatorPoly.from_terms(terms)
        out.append(RateSpec((relabel[i], relabel[j]), sp.k, sp.theta, sp.nu, psi))
    return out


@dataclass
class NscReport:
    predicted_limit: np.ndarray
    observed_limit: np.ndarray
    agreement: bool
    rule: str
    filled: List[int] = field(default_factory=list)
    emptied: List[int] = field(default_factory=list)
    residual_components: List[frozenset] = field(default_factory=list)
    peel_steps: List[int] = field(default_factory=list)
    residual_weakly_reversible: bool = True


def _component_equilibrium(model, rates, comp: Sequence[int], level: float) -> np.ndarray:
    sub, keep = model.subgraph(comp)
    if sub.m == 1 or not sub.transitions:
        if sub.m == 1:
            return np.array([level])
        raise ValidationError(f"component {sorted(comp)} has no internal transitions")
    return find_equilibrium(sub, restrict_rates(rates, keep), level).point


def _settle(model, net, n0, max_horizon, tol):
    """Simulate until the vector field is negligible; returns final state and sampled tail."""
    x = np.asarray(n0, dtype=float)
    horizon = 0.0
    chunk = 1.0
    tail = None
    while horizon < max_horizon:
        opts = _SETTLE.replace(t_end=chunk, dense_output_stride=chunk / 50)
        traj = simulate_reduced(model, net, x, opts)
        x = traj.final
        tail = traj
        horizon += chunk
        scale = max(_flux_scale(net, x), 1e-300)
        if np.max(np.abs(net.reduced_rhs(0.0, x))) <= tol * max(1.0, scale):
            break
        chunk *= 2
    else:
        raise NoConvergence(f"state still moving after horizon {horizon}")
    return x, tail


def classify_nsc_limit(
    model: CompartmentalModel,
    rates,
    n0,
    max_horizon: float = 1e4,
    threshold: float = 1e-5,
    agree_tol: float = 1e-4,
) -> NscReport:
    """Limit of a time-invariant model whose graph is not strongly connected.

    Two-component graphs (one source component feeding one trap component)
    get an exact prediction: if the total mass fits in the trap, the source
    empties and the trap settles at its own equilibrium; otherwise the trap
    fills and the source settles at the equilibrium of the remaining mass.
    Other graphs are handled by peeling filled traps and emptied sources
    detected in a long simulation, and predicting each remaining component
    from its own equilibrium.
    """
    net = _network(model, rates)
    _require_time_invariant(net)
    conn = connectivity(model)
    if conn.strongly_connected:
        raise ValidationError("model is strongly connected; use find_equilibrium")
    n0 = np.asarray(n0, dtype=float)
    r = float(n0.sum())
    c = model.c

    # RK45 near a filled compartment is stability-limited; its residual floor sits around 1e-9 of the flux scale
    observed, tail = _settle(model, net, n0, max_horizon, 1e-7)
    dag = conn.condensation

    if len(dag.components) == 2 and dag.dag_edges == ((0, 1),):
        src, trap = sorted(dag.components[0]), sorted(dag.components[1])
        cap_trap = float(sum(c[v - 1] for v in trap))
        pred = np.zeros(model.m)
        if r <= cap_trap:
            pred[[v - 1 for v in trap]] = _component_equilibrium(model, net.specs, trap, r)
            filled, emptied = [], src
        else:
            pred[[v - 1 for v in trap]] = c[[v - 1 for v in trap]]
            pred[[v - 1 for v in src]] = _component_equilibrium(model, net.specs, src, r - cap_trap)
            filled, emptied = trap, []
        agree = bool(np.max(np.abs(pred - observed)) <= agree_tol * max(1.0, c.max()))
        return NscReport(pred, observed, agree, "two_component", list(filled), list(emptied), [frozenset(src), frozenset(trap)])

    # sustained over the last 10% of the final simulated chunk
    window = tail.times >= tail.times[-1] - 0.1 * (tail.times[-1] - tail.times[0])
    tail_n = tail.n[window]
    full = np.all(tail_n >= c * (1 - threshold), axis=0)
    empty = np.all(tail_n <= c * threshold, axis=0)

    active = set(range(1, model.m + 1))
    filled_set, emptied_set = set(), set()
    steps = []
    while True:
        sub, keep = model.subgraph(active)
        sdag = condensation(sub)
        removed = set()
        for k in sdag.traps:
            comp = {keep[v - 1] for v in sdag.components[k]}
            if all(full[v - 1] for v in comp) and len(sdag.components) > 1:
                removed |= comp
                filled_set |= comp
        for k in sdag.sources:
            comp = {keep[v - 1] for v in sdag.components[k]}
            if all(empty[v - 1] for v in comp) and len(sdag.components) > 1:
                removed |= comp
                emptied_set |= comp
        if not removed:
            break
        active -= removed
        steps.append(len(active))
        if not active:
            break

    pred = np.zeros(model.m)
    for v in filled_set:
        pred[v - 1] = c[v - 1]
    residual_components = []
    wr = True
    if active:
        sub, keep = model.subgraph(active)
        sconn = connectivity(sub)
        wr = sconn.weakly_reversible
        for comp in sconn.condensation.components:
            labels = sorted(keep[v - 1] for v in comp)
            residual_components.append(frozenset(labels))
            level = float(observed[[v - 1 for v in labels]].sum())
            if wr:
                pred[[v - 1 for v in labels]] = _component_equilibrium(model, net.specs, labels, level)
            else:
                pred[[v - 1 for v in labels]] = observed[[v - 1 for v in labels]]
    agree = wr and bool(np.max(np.abs(pred - observed)) <= agree_tol * max(1.0, c.max()))
    return NscReport(
        pred,
        observed,
        agree,
        "peel",
        sorted(filled_set),
        sorted(emptied_set),
        residual_components,
        steps,
        wr,
    )


# ---------------------------------------------------------------------------
# entrainment


@dataclass
class PeriodicOrbitEstimate:
    period: float
    phases: np.ndarray
    samples: np.ndarray
    l1_history: np.ndarray
    ic_spread_history: np.ndarray
    trajectories: List[Trajectory] = field(default_factory=list, repr=False)

    @property
    def periodicity_residual(self) -> float:
        return float(self.l1_history[-1]) if len(self.l1_history) else 0.0

    @property
    def spread(self) -> float:
        return float(self.ic_spread_history[-1]) if len(self.ic_spread_history) else 0.0

    def increase_fraction(self, burn_in: int = 3, floor: float = 1e-6) -> float:
        """Share of post-burn-in periods whose residual rose by more than ``floor``.

        Once the ensemble has locked on, the residual sits at the integration
        noise level and wobbles; ``floor`` keeps that wobble from counting.
        """
        h = self.l1_history[burn_in:]
        if len(h) < 2:
            return 0.0
        return float(np.mean(np.diff(h) > floor))

    def to_csv(self, path=None) -> str:
        m = self.samples.shape[1]
        header = ["phase"] + [f"n_{i}" for i in range(1, m + 1)]
        text = csv_text(header, np.column_stack([self.phases, self.samples]))
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def common_period(specs: Sequence[RateSpec], period: Optional[float] = None) -> float:
    """Common period of all coefficients; constants fit any period."""
    periods = []
    for sp in specs:
        if sp.k.is_constant:
            continue
        p = sp.k.period
        if p is None:
            raise MixedPeriods(f"coefficient of edge {sp.edge} ({sp.k.kind}) is not periodic")
        periods.append(p)
    if period is None:
        if not periods:
            return 1.0
        period = max(periods)
    for p in periods:
        ratio = period / p
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise MixedPeriods(f"period {p} does not divide {period}")
    return float(period)


def entrainment_analysis(
    model: CompartmentalModel,
    rates,
    ensemble: Sequence[Sequence[float]],
    n_periods: int,
    samples_per_period: int = 256,
    opts: SimOptions = SimOptions(),
    period: Optional[float] = None,
) -> PeriodicOrbitEstimate:
    """Integrate an ensemble of initial states on one level set under
    periodic coefficients and track how fast it locks onto one periodic orbit.

    ``l1_history[p]`` is the largest (over the ensemble) integral over period
    ``p`` of ``||n(t + T) - n(t)||_1``. ``ic_spread_history[p]`` is the
    largest pointwise ``||n_a(t) - n_b(t)||_1`` over pairs and samples in
    period ``p``.
    """
    net = _network(model, rates)
    T = common_period(net.specs, period)
    if net.has_psi:
        warnings.warn("some rates have a nonzero Psi; the monotonicity hypothesis for entrainment may fail", stacklevel=2)
    ics = [np.asarray(x, dtype=float) for x in ensemble]
    if not ics:
        raise ValidationError("ensemble is empty")
    r = ics[0].sum()
    for x in ics:
        if abs(x.sum() - r) > 1e-9 * max(1.0, r):
            raise LevelSetMismatch(f"initial states lie on different level sets ({x.sum()} vs {r})")
    if n_periods < 1:
        raise ValidationError("n_periods must be at least 1")

    k = samples_per_period
    grid = T / k * np.arange(n_periods * k + 1)
    trajs = [simulate_reduced(model, net, x, opts.replace(t_end=grid[-1]), grid=grid) for x in ics]

    dt = T / k
    l1 = np.zeros(max(n_periods - 1, 0))
    for p in range(n_periods - 1):
        worst = 0.0
        for tr in trajs:
            a = tr.n[p * k : (p + 1) * k + 1]
            b = tr.n[(p + 1) * k : (p + 2) * k + 1]
            d = np.abs(b - a).sum(axis=1)
            worst = max(worst, float(np.trapezoid(d, dx=dt)))
        l1[p] = worst
    spread = np.zeros(n_periods)
    for p in range(n_periods):
        sl = slice(p * k, (p + 1) * k + 1)
        worst = 0.0
        for ta, tb in itertools.combinations(trajs, 2):
            worst = max(worst, float(np.abs(ta.n[sl] - tb.n[sl]).sum(axis=1).max()))
        spread[p] = worst
    last = trajs[0].n[(n_periods - 1) * k : n_periods * k]
    phases = dt * np.arange(k)
    return PeriodicOrbitEstimate(T, phases, last.copy(), l1, spread, trajs)
