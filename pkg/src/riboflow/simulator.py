"""Integration of the full (n, s) dynamics and the reduced n-dynamics."""

import io
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    CapacityViolation,
    EmptyWindow,
    NonFiniteState,
    NumericError,
    StepSizeUnderflow,
    ValidationError,
)
from .graph import CompartmentalModel
from .rates import RateSpec, Transform


@dataclass(frozen=True)
class SimOptions:
    method: str = "adaptive_rk45"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = math.inf
    t_end: float = 1.0
    dense_output_stride: float = 0.01

    def __post_init__(self):
        if self.method not in ("adaptive_rk45", "fixed_rk4"):
            raise ValidationError(f"unknown integration method {self.method!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValidationError("tolerances must be positive")
        if not self.t_end >= 0 or not math.isfinite(self.t_end):
            raise ValidationError("t_end must be finite and nonnegative")
        if not self.dense_output_stride > 0:
            raise ValidationError("dense_output_stride must be positive")
        if not self.max_step > 0:
            raise ValidationError("max_step must be positive")
        if self.method == "fixed_rk4" and not math.isfinite(self.max_step):
            raise ValidationError("fixed_rk4 needs a finite max_step (the step size)")

    def replace(self, **kw) -> "SimOptions":
        d = dict(self.__dict__)
        d.update(kw)
        return SimOptions(**d)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    capacities: np.ndarray
    level: float
    full: bool = False

    @property
    def m(self) -> int:
        return len(self.capacities)

    @property
    def n(self) -> np.ndarray:
        return self.states[:, : self.m]

    @property
    def s(self) -> np.ndarray:
        if self.full:
            return self.states[:, self.m :]
        return self.capacities - self.states

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def header(self) -> List[str]:
        cols = ["t"] + [f"n_{i}" for i in range(1, self.m + 1)]
        if self.full:
            cols += [f"s_{i}" for i in range(1, self.m + 1)]
        return cols

    def to_csv(self, path=None) -> str:
        text = csv_text(self.header(), np.column_stack([self.times, self.states]))
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def fmt(x: float) -> str:
    return f"{x:.12g}"


def csv_text(header: Sequence[str], rows: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in np.atleast_2d(rows):
        buf.write(",".join(fmt(float(x)) for x in row) + "\n")
    return buf.getvalue()


class RateNetwork:
    """Vectorized evaluation of all transition rates of a model.

    Rates are ordered like ``model.transitions``. Transitions sharing a
    transform are evaluated together.
    """

    def __init__(self, model: CompartmentalModel, rates: Sequence[RateSpec]):
        by_edge: Dict[Tuple[int, int], RateSpec] = {}
        for spec in rates:
            edge = tuple(spec.edge)
            if edge in by_edge:
                raise ValidationError(f"edge {edge} has more than one rate")
            if edge not in model.transitions:
                raise ValidationError(f"rate declared on undeclared edge {edge}")
            if spec.psi.size not in (None, model.m):
                raise ValidationError(f"Psi of edge {edge} has exponent vectors of length {spec.psi.size}, expected {model.m}")
            by_edge[edge] = spec
        missing = [e for e in model.transitions if e not in by_edge]
        if missing:
            raise ValidationError(f"transitions without a rate: {missing}")
        self.model = model
        self.specs: Tuple[RateSpec, ...] = tuple(by_edge[e] for e in model.transitions)
        self.src = model.src
        self.dst = model.dst
        self.c = model.c

        self._theta_groups = self._group(lambda sp: sp.theta)
        self._nu_groups = self._group(lambda sp: sp.nu)
        self._psi = [(k, sp) for k, sp in enumerate(self.specs) if not sp.psi.is_zero]
        const = [k for k, sp in enumerate(self.specs) if sp.k.is_constant]
        self._k_const = np.array([self.specs[k].k(0.0) for k in range(len(self.specs))])
        self._k_varying = [k for k in range(len(self.specs)) if k not in set(const)]

    def _group(self, key: Callable[[RateSpec], Transform]) -> List[Tuple[Transform, np.ndarray]]:
        groups: Dict[Transform, List[int]] = {}
        for k, sp in enumerate(self.specs):
            groups.setdefault(key(sp), []).append(k)
        return [(tr, np.array(idx, dtype=np.intp)) for tr, idx in groups.items()]

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return tuple(sorted({b for sp in self.specs for b in sp.k.breakpoints}))

    @property
    def has_psi(self) -> bool:
        return bool(self._psi)

    def coefficients(self, t: float) -> np.ndarray:
        if not self._k_varying:
            return self._k_const
        k = self._k_const.copy()
        for e in self._k_varying:
            k[e] = self.specs[e].k(t)
        return k

    def numerators(self, n: np.ndarray, s: np.ndarray) -> np.ndarray:
        """``theta(n_i) * nu(s_j)`` per transition."""
        out = np.empty(len(self.specs))
        for tr, idx in self._theta_groups:
            out[idx] = tr(n[self.src[idx]])
        for tr, idx in self._nu_groups:
            out[idx] *= tr(s[self.dst[idx]])
        return out

    def denominators(self, n: np.ndarray, s: np.ndarray) -> np.ndarray:
        out = np.ones(len(self.specs))
        for e, sp in self._psi:
            out[e] += sp.psi_value(n, s)
        return out

    def flux(self, n: np.ndarray, s: np.ndarray, t: float) -> np.ndarray:
        n = np.maximum(n, 0.0)
        s = np.maximum(s, 0.0)
        f = self.coefficients(t) * self.numerators(n, s)
        if self._psi:
            f /= self.denominators(n, s)
        return f

    def net(self, flux: np.ndarray) -> np.ndarray:
        m = self.model.m
        return np.bincount(self.dst, flux, m) - np.bincount(self.src, flux, m)

    def reduced_rhs(self, t: float, n: np.ndarray) -> np.ndarray:
        nn = np.clip(n, 0.0, self.c)
        return self.net(self.flux(nn, self.c - nn, t))

    def full_rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        m = self.model.m
        dn = self.net(self.flux(x[:m], x[m:], t))
        return np.concatenate([dn, -dn])


def vector_field(model: CompartmentalModel, rates: Sequence[RateSpec]) -> Callable[[np.ndarray, float], np.ndarray]:
    """Right-hand side ``f(n, t)`` of the reduced dynamics."""
    net = rates if isinstance(rates, RateNetwork) else RateNetwork(model, rates)
    return lambda n, t=0.0: net.reduced_rhs(t, np.asarray(n, dtype=float))


def factored_matrix(model: CompartmentalModel, rates: Sequence[RateSpec], n, t: float, kind: str = "general") -> np.ndarray:
    """Compartmental matrix of a factored form of the reduced dynamics.

    ``kind="general"`` gives ``A`` with ``dn/dt = A @ theta(n)``;
    ``kind="ltv"`` gives ``A`` with ``dn/dt = A @ n``.
    """
    from .rates import factor_general, factor_quasi_ltv

    net = rates if isinstance(rates, RateNetwork) else RateNetwork(model, rates)
    factor = {"general": factor_general, "ltv": factor_quasi_ltv}[kind]
    n = np.asarray(n, dtype=float)
    a = np.zeros((model.m, model.m))
    for spec in net.specs:
        i, j = spec.edge[0] - 1, spec.edge[1] - 1
        kf = factor(spec, n, t, model.c)
        a[j, i] += kf
        a[i, i] -= kf
    return a


def _grid(t_end: float, stride: float) -> np.ndarray:
    n = int(math.floor(t_end / stride + 1e-9))
    grid = stride * np.arange(n + 1)
    if t_end - grid[-1] > 1e-12 * max(1.0, t_end):
        grid = np.append(grid, t_end)
    return grid


def graded_grid(t_end: float, stride: float, first: float, per_decade: int) -> np.ndarray:
    """Output grid whose spacing grows geometrically from ``first`` until it
    reaches ``stride``, then stays uniform. Resolves fast initial transients
    without oversampling the rest of the horizon."""
    if not (t_end > 0 and stride > 0 and first > 0 and per_decade >= 1):
        raise ValidationError("graded grid needs t_end, stride, first > 0 and per_decade >= 1")
    growth = 10.0 ** (1.0 / per_decade) - 1.0
    pts = [0.0]
    t = first
    while t < t_end:
        pts.append(t)
        if t * growth >= stride:
            break
        t += t * growth
    if t < t_end:
        pts.extend((t + stride * np.arange(1, int((t_end - t) / stride) + 1)).tolist())
    if t_end - pts[-1] > 1e-12 * t_end:
        pts.append(t_end)
    return np.array(pts)


def _rk4(rhs, t0: float, t1: float, y: np.ndarray, h_max: float) -> np.ndarray:
    steps = max(1, int(math.ceil((t1 - t0) / h_max - 1e-12)))
    h = (t1 - t0) / steps
    t = t0
    for _ in range(steps):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def integrate(rhs, y0: np.ndarray, opts: SimOptions, breakpoints: Sequence[float] = (), grid=None) -> Tuple[np.ndarray, np.ndarray]:
    """Integrate ``rhs`` from 0 and sample on ``grid`` (default: the stride grid).

    Coefficient breakpoints are treated as hard step boundaries.
    """
    if grid is None:
        grid = _grid(opts.t_end, opts.dense_output_stride)
    grid = np.asarray(grid, dtype=float)
    out = np.empty((len(grid), len(y0)))
    out[0] = y0
    if len(grid) == 1:
        return grid, out
    t_end = grid[-1]
    cuts = [0.0] + [b for b in sorted(set(breakpoints)) if 0.0 < b < t_end] + [t_end]
    y = np.array(y0, dtype=float)
    for a, b in zip(cuts, cuts[1:]):
        inside = (grid > a) & (grid <= b)
        targets = grid[inside]
        if opts.method == "fixed_rk4":
            vals = []
            t = a
            for tt in targets:
                y = _rk4(rhs, t, tt, y, opts.max_step)
                t = tt
                vals.append(y)
            if t < b:
                y = _rk4(rhs, t, b, y, opts.max_step)
            if vals:
                out[inside] = np.array(vals)
        else:
            t_eval = targets if len(targets) and targets[-1] == b else np.append(targets, b)
            sol = solve_ivp(
                rhs,
                (a, b),
                y,
                method="RK45",
                t_eval=t_eval,
                rtol=opts.rel_tol,
                atol=opts.abs_tol,
                max_step=opts.max_step,
            )
            if sol.status != 0:
                if "step size" in sol.message:
                    raise StepSizeUnderflow(f"integration stopped at t={sol.t[-1] if len(sol.t) else a}: {sol.message}")
                raise NumericError(f"integration failed: {sol.message}")
            y = sol.y[:, -1].copy()
            out[inside] = sol.y[:, : len(targets)].T
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state reached before t={b}")
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("non-finite state in trajectory")
    return grid, out


def _enforce_box(states: np.ndarray, upper: np.ndarray, tol: float) -> np.ndarray:
    over = max(float(np.max(-states, initial=0.0)), float(np.max(states - upper, initial=0.0)))
    if over > tol:
        raise CapacityViolation(f"state left the capacity box by {over:.3g} (tolerance {tol:.3g})")
    return np.clip(states, 0.0, upper)


def _check_initial(x0: np.ndarray, upper: np.ndarray, what: str):
    if x0.shape != upper.shape:
        raise ValidationError(f"{what} has length {len(x0)}, expected {len(upper)}")
    if not np.all(np.isfinite(x0)):
        raise ValidationError(f"{what} contains non-finite entries")
    if np.any(x0 < 0) or np.any(x0 > upper * (1 + 1e-12)):
        raise ValidationError(f"{what} lies outside the capacity box")


def simulate_reduced(model: CompartmentalModel, rates, n0, opts: SimOptions = SimOptions(), grid=None) -> Trajectory:
    """Integrate ``dn_i/dt = sum_{j in D_i} K_ji - sum_{j in R_i} K_ij`` with ``s = c - n``."""
    net = rates if isinstance(rates, RateNetwork) else RateNetwork(model, rates)
    n0 = np.asarray(n0, dtype=float)
    _check_initial(n0, model.c, "initial state")
    n0 = np.minimum(n0, model.c)
    times, states = integrate(net.reduced_rhs, n0, opts, net.breakpoints, grid)
    states = _enforce_box(states, model.c, opts.abs_tol)
    return Trajectory(times, states, model.c.copy(), float(n0.sum()), full=False)


def simulate_full(model: CompartmentalModel, rates, n0, s0=None, opts: SimOptions = SimOptions(), grid=None) -> Trajectory:
    """Integrate the 2m-dimensional (n, s) system; ``s0`` defaults to ``c - n0``."""
    net = rates if isinstance(rates, RateNetwork) else RateNetwork(model, rates)
    n0 = np.asarray(n0, dtype=float)
    s0 = model.c - n0 if s0 is None else np.asarray(s0, dtype=float)
    if n0.shape != (model.m,) or s0.shape != (model.m,):
        raise ValidationError(f"initial n and s must have length {model.m}")
    if np.any(n0 < 0) or np.any(s0 < 0) or not np.all(np.isfinite(np.r_[n0, s0])):
        raise ValidationError("initial n and s must be finite and nonnegative")
    x0 = np.concatenate([n0, s0])
    times, states = integrate(net.full_rhs, x0, opts, net.breakpoints, grid)
    caps = n0 + s0
    states = _enforce_box(states, np.concatenate([caps, caps]), opts.abs_tol)
    return Trajectory(times, states, caps, float(n0.sum()), full=True)


@dataclass(frozen=True)
class ConservationReport:
    max_total_drift: float
    max_percompartment_drift: float


def _relative(dev: np.ndarray, ref) -> np.ndarray:
    ref = np.asarray(ref, dtype=float)
    return np.where(ref != 0, np.abs(dev) / np.where(ref != 0, np.abs(ref), 1.0), np.abs(dev))


def conservation_report(traj: Trajectory) -> ConservationReport:
    """Drift of the first integrals relative to their initial values.

    The total is ``sum n`` for reduced runs and ``sum (n + s)`` for full runs.
    The per-compartment drift tracks ``n_i + s_i`` (identically zero for
    reduced runs, where ``s = c - n``).
    """
    if len(traj.times) == 0:
        raise EmptyWindow("empty trajectory")
    total = traj.states.sum(axis=1)
    total_drift = float(np.max(_relative(total - total[0], total[0])))
    if traj.full:
        per = traj.n + traj.s
        comp_drift = float(np.max(_relative(per - per[0], per[0])))
    else:
        comp_drift = 0.0
    return ConservationReport(total_drift, comp_drift)


def persistence_margin(traj: Trajectory, tau: float) -> float:
    """``min_{t >= tau} min_i min(n_i(t), s_i(t))`` over the sampled trajectory."""
    window = traj.times >= tau - 1e-12
    if not np.any(window):
        raise EmptyWindow(f"no samples at or after tau={tau}")
    return float(min(traj.n[window].min(), traj.s[window].min()))
