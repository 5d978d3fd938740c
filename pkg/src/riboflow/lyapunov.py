"""Entropy-like Lyapunov functions

    V(n, nbar) = sum_i w_i * integral_{nbar_i}^{n_i} (log phi_i(r) - log phi_i(nbar_i)) dr

for a factor ``phi_i`` split off the rate numerator ``theta_i``. Every member
has gradient ``w_i (log phi_i(n_i) - log phi_i(nbar_i))``, so ``dV/dt`` can be
cross-checked against the vector field by the chain rule.

Closed forms are written around ``log1p`` of the relative deviation so that
values stay accurate near ``nbar``, where ``V`` is second order small.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .errors import BadParameter, BadReference, QuadratureFailure, ValidationError
from .rates import Transform
from .simulator import RateNetwork, Trajectory, csv_text

LYAPUNOV_KINDS = ("ltv", "general_integral", "lab", "hill_32", "hill_22", "hill_1505")


def _as_pair(n, nbar) -> Tuple[np.ndarray, np.ndarray]:
    n = np.asarray(n, dtype=float)
    nbar = np.asarray(nbar, dtype=float)
    if n.shape[-1:] != nbar.shape[-1:]:
        raise ValidationError(f"state and reference have different lengths ({n.shape[-1]} vs {nbar.shape[-1]})")
    if not np.all(np.isfinite(nbar)) or np.any(nbar <= 0):
        raise BadReference("reference state must be finite and strictly positive")
    if not np.all(np.isfinite(n)) or np.any(n < 0):
        raise ValidationError("state must be finite and nonnegative")
    return n, nbar


def _n_log_ratio(n, nbar):
    """``n log(n / nbar)`` with the ``n = 0`` limit 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = n * np.log1p((n - nbar) / nbar)
    return np.where(n == 0, 0.0, out)


def _log1p_minus(y):
    """``log1p(y) - y`` without cancellation for small ``y``."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-2
    ys = np.where(small, y, 0.0)
    # -y^2/2 + y^3/3 - ... by Horner; 12 terms leave an error below 1e-26 y^2
    acc = np.zeros_like(ys)
    for k in range(13, 1, -1):
        acc = (-1) ** (k + 1) / k + ys * acc
    yd = np.where(small, 0.0, y)
    return np.where(small, ys * ys * acc, np.log1p(yd) - yd)


# per-compartment terms; all vectorized over the last axis


def _ltv_terms(n, nbar):
    return _n_log_ratio(n, nbar) + (nbar - n)


def _lab_terms(l, a, b, n, nbar):
    shift = (l + n) * np.log1p((nbar - n) / (l + n))
    return (a - b) * (nbar - n) + a * _n_log_ratio(n, nbar) + b * shift


def _hill_terms(variant: str, l: float, n, nbar):
    if variant in ("hill_32", "hill_22"):
        sl = math.sqrt(l)
        d = nbar - n
        quad = n * np.log1p(d * (nbar + n) / (n * n + l))
        # atan(nbar/sl) - atan(n/sl) as a single arctangent, exact in d
        arc = 2 * sl * np.arctan(sl * d / (l + n * nbar))
        if variant == "hill_32":
            return (nbar - n) + 3 * _n_log_ratio(n, nbar) + quad + arc
        return 2 * _n_log_ratio(n, nbar) + quad + arc
    if variant == "hill_1505":
        u = np.sqrt(n)
        du = (nbar - n) / (np.sqrt(nbar) + u)
        y = du / (u + l)
        # (n - l^2) log1p(y) + l du regrouped to avoid cancelling O(l) terms
        return (nbar - n) + 1.5 * _n_log_ratio(n, nbar) + u * du + (n - l * l) * _log1p_minus(y)
    raise BadParameter(f"unknown Hill variant {variant!r}")


def _check_lab(l, a, b, m) -> Tuple[np.ndarray, np.ndarray]:
    if not (math.isfinite(l) and l > 0):
        raise BadParameter(f"l must be positive, got {l}")
    a = np.broadcast_to(np.asarray(a, dtype=float), (m,))
    b = np.broadcast_to(np.asarray(b, dtype=float), (m,))
    if np.any(a <= 0) or np.any(b < 0) or np.any(b > a):
        raise BadParameter("need a_i > 0 and 0 <= b_i <= a_i")
    return a, b


def v_ltv(n, nbar) -> float:
    """``sum_i (n_i log(n_i / nbar_i) + nbar_i - n_i)``.

    >>> round(v_ltv([2.0], [1.0]), 6)
    0.386294
    """
    n, nbar = _as_pair(n, nbar)
    return float(np.sum(_ltv_terms(n, nbar), axis=-1))


def v_lab(l: float, a, b, n, nbar) -> float:
    """Member induced by ``theta_i(r) = r**a_i / (l + r)**b_i``."""
    n, nbar = _as_pair(n, nbar)
    a, b = _check_lab(l, a, b, n.shape[-1])
    return float(np.sum(_lab_terms(l, a, b, n, nbar), axis=-1))


def v_hill(variant: str, l: float, n, nbar) -> float:
    """Closed forms for ``r**3/(l+r**2)`` (hill_32), ``r**2/(l+r**2)`` (hill_22)
    and ``r**1.5/(l+r**0.5)`` (hill_1505)."""
    if not (math.isfinite(l) and l > 0):
        raise BadParameter(f"l must be positive, got {l}")
    n, nbar = _as_pair(n, nbar)
    return float(np.sum(_hill_terms(variant, l, n, nbar), axis=-1))


def _integral(theta: Transform, x: float, xbar: float) -> float:
    if x == xbar:
        return 0.0
    ref = float(theta.log(xbar))

    # r = u^2 smooths the log singularity at r = 0
    def g(u):
        if u == 0.0:
            return 0.0
        return 2.0 * u * (float(theta.log(u * u)) - ref)

    lo, hi = math.sqrt(xbar), math.sqrt(x)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(g, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"quadrature on [{xbar}, {x}] failed: {exc}") from None
    if not math.isfinite(val) or err > 1e-10 * max(1.0, abs(val)):
        raise QuadratureFailure(f"quadrature error estimate {err:.3g} too large on [{xbar}, {x}]")
    return val


def v_general(theta_list: Sequence[Transform], n, nbar) -> float:
    """Integral form, evaluated by adaptive quadrature per compartment
    (substituting ``r = u**2`` to smooth the log singularity at 0)."""
    n, nbar = _as_pair(n, nbar)
    if n.ndim != 1:
        raise ValidationError("v_general takes a single state vector")
    if len(theta_list) != len(n):
        raise ValidationError(f"need {len(n)} transforms, got {len(theta_list)}")
    total = 0.0
    for th, x, xb in zip(theta_list, n, nbar):
        total += _integral(th, float(x), float(xb))
    return total


@dataclass(frozen=True)
class LyapunovSpec:
    """One family member.

    ``params`` by kind: ``ltv`` none; ``lab`` ``l``, ``a``, ``b``;
    ``hill_*`` ``l``; ``general_integral`` ``thetas`` (one Transform per
    compartment). ``weights`` scale the per-compartment terms.
    """

    kind: str
    l: Optional[float] = None
    a: Optional[Tuple[float, ...]] = None
    b: Optional[Tuple[float, ...]] = None
    thetas: Optional[Tuple[Transform, ...]] = None
    weights: Optional[Tuple[float, ...]] = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in LYAPUNOV_KINDS:
            raise BadParameter(f"unknown Lyapunov kind {self.kind!r}")
        if self.kind in ("lab", "hill_32", "hill_22", "hill_1505"):
            if self.l is None or not (math.isfinite(self.l) and self.l > 0):
                raise BadParameter(f"{self.kind} needs l > 0")
        if self.kind == "lab":
            if self.a is None or self.b is None:
                raise BadParameter("lab needs a and b")
            _check_lab(self.l, self.a, self.b, len(self.a))
        if self.kind == "general_integral":
            # every Transform kind is strictly increasing with theta(0) = 0 by construction
            if not self.thetas:
                raise BadParameter("general_integral needs one transform per compartment")
        if self.weights is not None and any(not (w > 0) for w in self.weights):
            raise BadParameter("weights must be positive")

    @classmethod
    def ltv(cls, weights=None) -> "LyapunovSpec":
        return cls("ltv", weights=_tup(weights))

    @classmethod
    def lab(cls, l, a, b, weights=None) -> "LyapunovSpec":
        return cls("lab", l=float(l), a=_tup(a), b=_tup(b), weights=_tup(weights))

    @classmethod
    def hill(cls, variant: str, l, weights=None) -> "LyapunovSpec":
        return cls(variant, l=float(l), weights=_tup(weights))

    @classmethod
    def general(cls, thetas, weights=None) -> "LyapunovSpec":
        return cls("general_integral", thetas=tuple(thetas), weights=_tup(weights))

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "lab":
            return f"lab(l={self.l:g}, a={list(self.a)}, b={list(self.b)})"
        if self.kind.startswith("hill"):
            return f"{self.kind}(l={self.l:g})"
        return self.kind

    def factors(self, m: int) -> Tuple[Transform, ...]:
        """The factor ``phi_i`` of every compartment."""
        k = self.kind
        if k == "ltv":
            return (Transform.identity(),) * m
        if k == "lab":
            a, b = _check_lab(self.l, self.a, self.b, m)
            return tuple(Transform.power_over_shifted_power(self.l, ai, bi) for ai, bi in zip(a, b))
        if k == "hill_32":
            return (Transform.power_over_power_sum(self.l, 3, 2),) * m
        if k == "hill_22":
            return (Transform.power_over_power_sum(self.l, 2, 2),) * m
        if k == "hill_1505":
            return (Transform.power_over_power_sum(self.l, 1.5, 0.5),) * m
        if len(self.thetas) != m:
            raise ValidationError(f"need {m} transforms, got {len(self.thetas)}")
        return self.thetas

    def _weights(self, m: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(m)
        if len(self.weights) != m:
            raise ValidationError(f"need {m} weights, got {len(self.weights)}")
        return np.asarray(self.weights, dtype=float)

    def terms(self, n, nbar) -> np.ndarray:
        """Weighted per-compartment contributions; ``n`` may be a stack of states."""
        n, nbar = _as_pair(n, nbar)
        m = nbar.shape[-1]
        k = self.kind
        if k == "ltv":
            t = _ltv_terms(n, nbar)
        elif k == "lab":
            a, b = _check_lab(self.l, self.a, self.b, m)
            t = _lab_terms(self.l, a, b, n, nbar)
        elif k.startswith("hill"):
            t = _hill_terms(k, self.l, n, nbar)
        else:
            th = self.factors(m)
            rows = np.atleast_2d(n)
            t = np.array([[_integral(th[i], float(x[i]), float(nbar[i])) for i in range(m)] for x in rows])
            t = t.reshape(n.shape)
        return self._weights(m) * t

    def value(self, n, nbar):
        out = np.sum(self.terms(n, nbar), axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def gradient(self, n, nbar) -> np.ndarray:
        n, nbar = _as_pair(n, nbar)
        m = nbar.shape[-1]
        th = self.factors(m)
        g = np.empty(np.broadcast_shapes(n.shape, nbar.shape))
        for i, t in enumerate(th):
            g[..., i] = t.log(n[..., i]) - t.log(nbar[i])
        return self._weights(m) * g

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.l is not None:
            d["l"] = self.l
        if self.a is not None:
            d["a"] = list(self.a)
            d["b"] = list(self.b)
        if self.thetas is not None:
            d["thetas"] = [t.to_dict() for t in self.thetas]
        if self.weights is not None:
            d["weights"] = list(self.weights)
        if self.label:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LyapunovSpec":
        d = dict(d)
        unknown = set(d) - {"kind", "l", "a", "b", "thetas", "weights", "label"}
        if unknown:
            raise BadParameter(f"unexpected Lyapunov fields {sorted(unknown)}")
        return cls(
            kind=d.get("kind", ""),
            l=None if d.get("l") is None else float(d["l"]),
            a=_tup(d.get("a")),
            b=_tup(d.get("b")),
            thetas=None if d.get("thetas") is None else tuple(Transform.from_dict(t) for t in d["thetas"]),
            weights=_tup(d.get("weights")),
            label=d.get("label", ""),
        )


def _tup(x):
    return None if x is None else tuple(float(v) for v in x)


@dataclass
class LyapunovProfile:
    times: np.ndarray
    values: np.ndarray
    derivative_estimates: np.ndarray
    chain_rule: Optional[np.ndarray] = field(default=None)

    def to_csv(self, path=None) -> str:
        text = csv_text(["t", "V", "dVdt"], np.column_stack([self.times, self.values, self.derivative_estimates]))
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def max_interior_derivative(self) -> float:
        d = self.derivative_estimates[1:-1]
        return float(d.max()) if len(d) else -math.inf

    def chain_rule_mismatch(self, threshold: float = 1e-6) -> float:
        """Largest relative gap between the two derivative estimates where ``|dV/dt| > threshold``."""
        if self.chain_rule is None:
            raise ValidationError("profile has no chain-rule estimate")
        fd, cr = self.derivative_estimates[1:-1], self.chain_rule[1:-1]
        mask = np.abs(fd) > threshold
        if not np.any(mask):
            return 0.0
        return float(np.max(np.abs(fd[mask] - cr[mask]) / np.abs(fd[mask])))


def lyapunov_profile(traj: Trajectory, spec: LyapunovSpec, nbar, network: Optional[RateNetwork] = None) -> LyapunovProfile:
    """``V`` at every sample, with ``dV/dt`` by central differences
    (one-sided at the ends). Passing the rate network adds the chain-rule
    estimate ``grad V . f``."""
    nbar = np.asarray(nbar, dtype=float)
    if nbar.shape != (traj.m,):
        raise BadReference(f"reference has length {len(nbar)}, expected {traj.m}")
    n = traj.n
    values = spec.value(n, nbar)
    values = np.atleast_1d(values)
    if len(traj.times) >= 2:
        deriv = np.gradient(values, traj.times)
    else:
        deriv = np.zeros_like(values)
    chain = None
    if network is not None:
        if not isinstance(network, RateNetwork):
            raise ValidationError("chain-rule estimate needs a RateNetwork(model, rates), not a bare rate list")
        chain = np.empty(len(traj.times))
        grads = spec.gradient(n, nbar)
        for k, (t, x) in enumerate(zip(traj.times, n)):
            chain[k] = float(grads[k] @ network.reduced_rhs(t, x))
    return LyapunovProfile(traj.times.copy(), values, deriv, chain)


def manifold_surface(spec: LyapunovSpec, nbar, level: float, capacities, n1_grid, n2_grid) -> np.ndarray:
    """``V`` on the level set of a three-compartment model, with ``n_3 = level - n_1 - n_2``.

    Returns rows ``(n1, n2, V)``; grid points outside the capacity box are skipped.
    """
    c = np.asarray(capacities, dtype=float)
    if c.shape != (3,):
        raise ValidationError("manifold surface needs exactly three compartments")
    rows = []
    for x in n1_grid:
        for y in n2_grid:
            z = level - x - y
            if 0 <= x <= c[0] and 0 <= y <= c[1] and 0 <= z <= c[2]:
                rows.append((x, y, spec.value(np.array([x, y, z]), nbar)))
    return np.array(rows).reshape(-1, 3)


def surface_csv(rows: np.ndarray, path=None) -> str:
    text = csv_text(["n1", "n2", "V"], rows)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def convergence_gap(l: float, a, b, points, nbar) -> float:
    """Largest ``|V^(l,a,b) - sum_i a_i V_i^LTV|`` over ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lab = LyapunovSpec.lab(l, a, b)
    ltv = LyapunovSpec.ltv(weights=a)
    return float(np.max(np.abs(lab.value(pts, nbar) - ltv.value(pts, nbar))))
