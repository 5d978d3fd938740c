"""Transition rate functions of the form

    K_ij(n, s, t) = k_ij(t) * theta(n_i) * nu(s_j) / (1 + Psi_ij(n, s))

built from a closed set of structured pieces so that bounds and
factorizations can be derived mechanically.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import BadParameter, NonFiniteInput, UnboundedCoefficient

TRANSFORM_KINDS = (
    "identity",
    "power",
    "monod",
    "hill_ratio",
    "power_over_shifted_power",
    "power_over_power_sum",
)

_PARAMS = {
    "identity": (),
    "power": ("a",),
    "monod": ("l",),
    "hill_ratio": ("l", "L"),
    "power_over_shifted_power": ("l", "a", "b"),
    "power_over_power_sum": ("l", "a", "b"),
}


@dataclass(frozen=True)
class Transform:
    """Nondecreasing map ``r -> theta(r)`` with ``theta(0) = 0``.

    ==========================  ====================
    kind                        theta(r)
    ==========================  ====================
    identity                    r
    power(a)                    r**a
    monod(l)                    r / (l + r)
    hill_ratio(l, L)            r**L / (l + r**L)
    power_over_shifted_power    r**a / (l + r)**b
    power_over_power_sum        r**a / (l + r**b)
    ==========================  ====================

    The last two require ``a >= b >= 0`` and ``a > 0``.
    """

    kind: str = "identity"
    l: float = 0.0
    a: float = 1.0
    b: float = 0.0
    L: float = 1.0

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise BadParameter(f"unknown transform kind {self.kind!r}")
        for name in ("l", "a", "b", "L"):
            if not math.isfinite(getattr(self, name)):
                raise BadParameter(f"transform parameter {name} must be finite")
        needs = _PARAMS[self.kind]
        if "l" in needs and self.l <= 0:
            raise BadParameter(f"{self.kind}: l must be positive, got {self.l}")
        if "a" in needs and self.a <= 0:
            raise BadParameter(f"{self.kind}: a must be positive, got {self.a}")
        if "b" in needs and not 0 <= self.b <= self.a:
            raise BadParameter(f"{self.kind}: need 0 <= b <= a, got a={self.a}, b={self.b}")
        if "L" in needs and self.L <= 0:
            raise BadParameter(f"{self.kind}: L must be positive, got {self.L}")

    # constructors
    @classmethod
    def identity(cls) -> "Transform":
        return cls("identity")

    @classmethod
    def power(cls, a: float) -> "Transform":
        return cls("power", a=float(a))

    @classmethod
    def monod(cls, l: float) -> "Transform":
        return cls("monod", l=float(l))

    @classmethod
    def hill_ratio(cls, l: float, L: float) -> "Transform":
        return cls("hill_ratio", l=float(l), L=float(L))

    @classmethod
    def power_over_shifted_power(cls, l: float, a: float, b: float) -> "Transform":
        return cls("power_over_shifted_power", l=float(l), a=float(a), b=float(b))

    @classmethod
    def power_over_power_sum(cls, l: float, a: float, b: float) -> "Transform":
        return cls("power_over_power_sum", l=float(l), a=float(a), b=float(b))

    def __call__(self, r):
        r = np.maximum(r, 0.0)
        k = self.kind
        if k == "identity":
            return r * 1.0
        if k == "power":
            return r**self.a
        if k == "monod":
            return r / (self.l + r)
        if k == "hill_ratio":
            rl = r**self.L
            return rl / (self.l + rl)
        if k == "power_over_shifted_power":
            return r**self.a / (self.l + r) ** self.b
        return r**self.a / (self.l + r**self.b)

    def log(self, r):
        """``log(theta(r))`` computed without forming theta; ``-inf`` at 0."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            lr = np.log(r)
        k = self.kind
        if k == "identity":
            return lr
        if k == "power":
            return self.a * lr
        if k == "monod":
            return lr - np.log(self.l + r)
        if k == "hill_ratio":
            return self.L * lr - np.log(self.l + r**self.L)
        if k == "power_over_shifted_power":
            return self.a * lr - self.b * np.log(self.l + r)
        return self.a * lr - np.log(self.l + r**self.b)

    def hat(self, r):
        """The factor ``theta(r) / r``, continued to ``r = 0``."""
        r = np.maximum(r, 0.0)
        k = self.kind
        with np.errstate(divide="ignore"):
            if k == "identity":
                return np.ones_like(r, dtype=float)
            if k == "power":
                return r ** (self.a - 1.0)
            if k == "monod":
                return 1.0 / (self.l + r)
            if k == "hill_ratio":
                return r ** (self.L - 1.0) / (self.l + r**self.L)
            if k == "power_over_shifted_power":
                return r ** (self.a - 1.0) / (self.l + r) ** self.b
            return r ** (self.a - 1.0) / (self.l + r**self.b)

    @property
    def sup(self) -> float:
        """Supremum of the range over ``[0, inf)``."""
        if self.kind in ("monod", "hill_ratio"):
            return 1.0
        if self.kind in ("power_over_shifted_power", "power_over_power_sum") and self.a == self.b:
            return 1.0
        return math.inf

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in _PARAMS[self.kind]:
            out[name] = getattr(self, name)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Transform":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in TRANSFORM_KINDS:
            raise BadParameter(f"unknown transform kind {kind!r}")
        extra = set(d) - set(_PARAMS[kind])
        if extra:
            raise BadParameter(f"{kind}: unexpected parameters {sorted(extra)}")
        missing = set(_PARAMS[kind]) - set(d)
        if missing:
            raise BadParameter(f"{kind}: missing parameters {sorted(missing)}")
        return cls(kind, **{k: float(v) for k, v in d.items()})


TIME_KINDS = ("constant", "decaying", "sinusoid", "piecewise")


@dataclass(frozen=True)
class TimeCoefficient:
    """Time-dependent rate coefficient ``k(t)``.

    constant:  ``value``
    decaying:  ``value * (1 + amplitude * exp(-rate * t))``
    sinusoid:  ``value * (offset + amplitude * wave(frequency * t + phase))``,
               ``wave`` is ``cos`` or ``sin``
    piecewise: ``pieces[k][1](t)`` for ``pieces[k][0] <= t < pieces[k + 1][0]``
    """

    kind: str = "constant"
    value: float = 1.0
    amplitude: float = 0.0
    rate: float = 0.0
    offset: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0
    wave: str = "cos"
    pieces: Tuple[Tuple[float, "TimeCoefficient"], ...] = ()

    def __post_init__(self):
        if self.kind not in TIME_KINDS:
            raise BadParameter(f"unknown time coefficient kind {self.kind!r}")
        if self.kind == "piecewise":
            if not self.pieces:
                raise BadParameter("piecewise coefficient needs at least one piece")
            starts = [p[0] for p in self.pieces]
            if starts[0] != 0.0:
                raise BadParameter("first piece of a piecewise coefficient must start at t = 0")
            if any(b <= a for a, b in zip(starts, starts[1:])):
                raise BadParameter("piecewise breakpoints must be strictly increasing")
        else:
            for name in ("value", "amplitude", "rate", "offset", "frequency", "phase"):
                if not math.isfinite(getattr(self, name)):
                    raise BadParameter(f"coefficient parameter {name} must be finite")
        if self.kind == "sinusoid":
            if self.wave not in ("cos", "sin"):
                raise BadParameter(f"wave must be 'cos' or 'sin', got {self.wave!r}")
            if self.frequency <= 0:
                raise BadParameter("sinusoid frequency must be positive")
        lo, _ = self.bounds()
        if not lo > 0:
            raise BadParameter(f"coefficient must have a positive lower bound, got {lo}")

    @classmethod
    def constant(cls, value: float) -> "TimeCoefficient":
        return cls("constant", value=float(value))

    @classmethod
    def decaying(cls, value: float, amplitude: float, rate: float) -> "TimeCoefficient":
        return cls("decaying", value=float(value), amplitude=float(amplitude), rate=float(rate))

    @classmethod
    def sinusoid(cls, value, offset, amplitude, frequency, phase=0.0, wave="cos") -> "TimeCoefficient":
        return cls(
            "sinusoid",
            value=float(value),
            offset=float(offset),
            amplitude=float(amplitude),
            frequency=float(frequency),
            phase=float(phase),
            wave=wave,
        )

    @classmethod
    def piecewise(cls, pieces: Sequence[Tuple[float, "TimeCoefficient"]]) -> "TimeCoefficient":
        return cls("piecewise", pieces=tuple((float(t0), k) for t0, k in pieces))

    def __call__(self, t: float) -> float:
        k = self.kind
        if k == "constant":
            return self.value
        if k == "decaying":
            return self.value * (1.0 + self.amplitude * math.exp(-self.rate * t))
        if k == "sinusoid":
            w = math.cos if self.wave == "cos" else math.sin
            return self.value * (self.offset + self.amplitude * w(self.frequency * t + self.phase))
        active = self.pieces[0][1]
        for t0, piece in self.pieces:
            if t >= t0:
                active = piece
            else:
                break
        return active(t)

    def bounds(self) -> Tuple[float, float]:
        """Closed-form ``(inf, sup)`` of ``k(t)`` over ``t >= 0``."""
        k = self.kind
        if k == "constant":
            return self.value, self.value
        if k == "decaying":
            if self.rate > 0:
                ends = (self.value, self.value * (1.0 + self.amplitude))
            elif self.rate == 0:
                ends = (self.value * (1.0 + self.amplitude),) * 2
            else:
                ends = (self.value * (1.0 + self.amplitude), math.copysign(math.inf, self.value * self.amplitude))
            return min(ends), max(ends)
        if k == "sinusoid":
            spread = abs(self.value * self.amplitude)
            mid = self.value * self.offset
            return mid - spread, mid + spread
        los, his = zip(*(p.bounds() for _, p in self.pieces))
        return min(los), max(his)

    @property
    def is_constant(self) -> bool:
        if self.kind == "piecewise":
            return False
        return self.kind == "constant" or (self.kind == "decaying" and self.amplitude == 0.0)

    def nominal(self) -> "TimeCoefficient":
        """Constant coefficient a decaying perturbation settles to."""
        if self.kind == "constant":
            return self
        if self.kind == "decaying" and (self.rate > 0 or self.amplitude == 0):
            return TimeCoefficient.constant(self.value)
        raise BadParameter(f"{self.kind} coefficient has no nominal constant value")

    @property
    def period(self) -> Optional[float]:
        """Period of a sinusoid; ``None`` for every other kind."""
        if self.kind == "sinusoid":
            return 2.0 * math.pi / self.frequency
        return None

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        if self.kind != "piecewise":
            return ()
        inner = tuple(t0 for t0, _ in self.pieces[1:])
        nested = tuple(b for _, p in self.pieces for b in p.breakpoints)
        return tuple(sorted(set(inner + nested)))

    def to_dict(self) -> dict:
        k = self.kind
        if k == "constant":
            return {"kind": k, "value": self.value}
        if k == "decaying":
            return {"kind": k, "value": self.value, "amplitude": self.amplitude, "rate": self.rate}
        if k == "sinusoid":
            return {
                "kind": k,
                "value": self.value,
                "offset": self.offset,
                "amplitude": self.amplitude,
                "frequency": self.frequency,
                "phase": self.phase,
                "wave": self.wave,
            }
        return {"kind": k, "pieces": [[t0, p.to_dict()] for t0, p in self.pieces]}

    @classmethod
    def from_dict(cls, d) -> "TimeCoefficient":
        if isinstance(d, (int, float)):
            return cls.constant(d)
        d = dict(d)
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(d["value"])
        if kind == "decaying":
            return cls.decaying(d["value"], d["amplitude"], d["rate"])
        if kind == "sinusoid":
            return cls.sinusoid(
                d["value"], d.get("offset", 1.0), d["amplitude"], d["frequency"], d.get("phase", 0.0), d.get("wave", "cos")
            )
        if kind == "piecewise":
            return cls.piecewise([(t0, cls.from_dict(p)) for t0, p in d["pieces"]])
        raise BadParameter(f"unknown time coefficient kind {kind!r}")


@dataclass(frozen=True)
class DenominatorPoly:
    """``Psi(n, s) = sum_k alpha_k prod_l theta(n_l)**r1[l] * nu(s_l)**r2[l]``.

    An empty term list represents ``Psi == 0``.
    """

    terms: Tuple[Tuple[float, Tuple[int, ...], Tuple[int, ...]], ...] = ()

    def __post_init__(self):
        for alpha, r1, r2 in self.terms:
            if not (math.isfinite(alpha) and alpha >= 0):
                raise BadParameter(f"Psi coefficients must be nonnegative and finite, got {alpha}")
            if len(r1) != len(r2):
                raise BadParameter("Psi exponent vectors must have equal length")
            if any(int(e) != e or e < 0 for e in (*r1, *r2)):
                raise BadParameter("Psi exponents must be nonnegative integers")

    @classmethod
    def from_terms(cls, terms) -> "DenominatorPoly":
        return cls(tuple((float(a), tuple(int(x) for x in r1), tuple(int(x) for x in r2)) for a, r1, r2 in terms))

    @property
    def is_zero(self) -> bool:
        return all(alpha == 0 for alpha, _, _ in self.terms)

    @property
    def size(self) -> Optional[int]:
        return len(self.terms[0][1]) if self.terms else None

    def __call__(self, theta_n: np.ndarray, nu_s: np.ndarray) -> float:
        total = 0.0
        for alpha, r1, r2 in self.terms:
            total += alpha * float(np.prod(np.power(theta_n, r1)) * np.prod(np.power(nu_s, r2)))
        return total

    def to_list(self) -> list:
        return [[alpha, list(r1), list(r2)] for alpha, r1, r2 in self.terms]


@dataclass(frozen=True)
class RateSpec:
    """Rate of the transition ``edge = (i, j)`` (1-based compartment labels)."""

    edge: Tuple[int, int]
    k: TimeCoefficient
    theta: Transform = field(default_factory=Transform.identity)
    nu: Transform = field(default_factory=Transform.identity)
    psi: DenominatorPoly = field(default_factory=DenominatorPoly)

    def psi_value(self, n: np.ndarray, s: np.ndarray) -> float:
        if self.psi.is_zero:
            return 0.0
        return self.psi(self.theta(n), self.nu(s))

    def to_dict(self) -> dict:
        return {
            "edge": list(self.edge),
            "k": self.k.to_dict(),
            "theta": self.theta.to_dict(),
            "nu": self.nu.to_dict(),
            "psi": self.psi.to_list(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RateSpec":
        return cls(
            edge=tuple(int(x) for x in d["edge"]),
            k=TimeCoefficient.from_dict(d["k"]),
            theta=Transform.from_dict(d.get("theta", {"kind": "identity"})),
            nu=Transform.from_dict(d.get("nu", {"kind": "identity"})),
            psi=DenominatorPoly.from_terms(d.get("psi", [])),
        )


def _state(n, s=None):
    n = np.asarray(n, dtype=float)
    if not np.all(np.isfinite(n)) or (s is not None and not np.all(np.isfinite(s))):
        raise NonFiniteInput("state contains non-finite entries")
    if s is None:
        return n
    return n, np.asarray(s, dtype=float)


def eval_rate(spec: RateSpec, n, s, t: float) -> float:
    """Value of ``K_ij(n, s, t)``; exactly zero when ``n_i = 0`` or ``s_j = 0``."""
    n, s = _state(n, s)
    if not math.isfinite(t):
        raise NonFiniteInput("time must be finite")
    i, j = spec.edge[0] - 1, spec.edge[1] - 1
    top = float(spec.theta(n[i]) * spec.nu(s[j]))
    if top == 0.0:
        return 0.0
    return spec.k(t) * top / (1.0 + spec.psi_value(n, s))


def rate_envelope(spec: RateSpec, capacities) -> Tuple[Callable, Callable]:
    """Time-invariant lower and upper envelopes of ``K_ij`` on the capacity box.

    Both are functions of ``(n_i, s_j)``.
    """
    c = np.asarray(capacities, dtype=float)
    k_lo, k_hi = spec.k.bounds()
    if not math.isfinite(k_hi):
        raise UnboundedCoefficient(f"coefficient of edge {spec.edge} has no finite upper bound")
    scale = k_lo / (1.0 + spec.psi_value(c, c))
    theta, nu = spec.theta, spec.nu

    def lower(n_i, s_j):
        return scale * theta(n_i) * nu(s_j)

    def upper(n_i, s_j):
        return k_hi * theta(n_i) * nu(s_j)

    return lower, upper


def factor_general(spec: RateSpec, n, t: float, capacities) -> float:
    """Coefficient ``k~`` with ``K_ij(n, c - n, t) = k~ * theta(n_i)``."""
    n = _state(n)
    c = np.asarray(capacities, dtype=float)
    j = spec.edge[1] - 1
    s = c - n
    return spec.k(t) * float(spec.nu(s[j])) / (1.0 + spec.psi_value(n, s))


def factor_quasi_ltv(spec: RateSpec, n, t: float, capacities) -> float:
    """Coefficient ``k^`` with ``K_ij(n, c - n, t) = k^ * n_i``."""
    n = _state(n)
    hat = float(spec.theta.hat(n[spec.edge[0] - 1]))
    if not math.isfinite(hat):
        raise NonFiniteInput(f"theta/r is unbounded at n_{spec.edge[0]} = 0 for {spec.theta.kind}")
    return factor_general(spec, n, t, capacities) * hat


KINETICS = ("mass_action", "monod", "monod_psi", "hill", "modified_hill", "saturating_power")


def make_kinetics(
    name: str,
    k,
    edge: Tuple[int, int] = (1, 2),
    l: Optional[float] = None,
    L: float = 1.0,
    a: float = 1.0,
    b: float = 1.0,
    m: Optional[int] = None,
) -> RateSpec:
    """Named kinetics on one edge.

    ``mass_action``       theta = nu = r
    ``monod``             theta = nu = r / (l + r)
    ``monod_psi``         theta = nu = r, Psi = l**2 - 1 + l n_i + l s_j + n_i s_j (needs ``m``)
    ``hill``              theta = nu = r**L / (l + r**L)
    ``modified_hill``     theta = nu = r**3 / (l + r**2)
    ``saturating_power``  theta = nu = r**a / (l + r)**b
    """
    if not isinstance(k, TimeCoefficient):
        k = TimeCoefficient.constant(k)
    edge = (int(edge[0]), int(edge[1]))
    if name == "mass_action":
        return RateSpec(edge, k)
    if name not in KINETICS:
        raise BadParameter(f"unknown kinetics {name!r}")
    if l is None or not l > 0:
        raise BadParameter(f"{name} needs l > 0, got {l}")
    if name == "monod":
        t = Transform.monod(l)
        return RateSpec(edge, k, t, t)
    if name == "monod_psi":
        if l < 1:
            raise BadParameter("monod_psi needs l >= 1 so that l**2 - 1 >= 0")
        if m is None:
            raise BadParameter("monod_psi needs the compartment count m")
        i, j = edge[0] - 1, edge[1] - 1
        zero = [0] * m
        ei = list(zero)
        ei[i] = 1
        ej = list(zero)
        ej[j] = 1
        psi = DenominatorPoly.from_terms([(l * l - 1.0, zero, zero), (l, ei, zero), (l, zero, ej), (1.0, ei, ej)])
        return RateSpec(edge, k, Transform.identity(), Transform.identity(), psi)
    if name == "hill":
        if L < 1:
            raise BadParameter(f"hill needs L >= 1, got {L}")
        t = Transform.hill_ratio(l, L)
        return RateSpec(edge, k, t, t)
    if name == "modified_hill":
        t = Transform.power_over_power_sum(l, 3.0, 2.0)
        return RateSpec(edge, k, t, t)
    t = Transform.power_over_shifted_power(l, a, b)
    return RateSpec(edge, k, t, t)
