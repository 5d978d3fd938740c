"""Reaction network assigned to a compartmental model.

Each transition ``(i, j)`` becomes the reaction ``N_i + S_j -> N_j + S_i`` over
the ``2m`` species ``N_1..N_m, S_1..S_m`` (species index ``i - 1`` and
``m + i - 1``).
"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import TooLarge, ValidationError
from .graph import CompartmentalModel, connectivity

Complex = Tuple[int, ...]


@dataclass(frozen=True)
class Crn:
    model: CompartmentalModel
    species: Tuple[str, ...]
    reactions: Tuple[Tuple[Complex, Complex], ...]
    complexes: Tuple[Complex, ...]
    linkage_classes: Tuple[FrozenSet[int], ...]

    @property
    def n_species(self) -> int:
        return len(self.species)

    def reaction_vectors(self) -> np.ndarray:
        """Integer matrix with one column ``y' - y`` per reaction."""
        if not self.reactions:
            return np.zeros((self.n_species, 0), dtype=int)
        return np.array([np.subtract(p, s) for s, p in self.reactions], dtype=int).T

    def species_index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise ValidationError(f"unknown species {name!r}") from None


@dataclass(frozen=True)
class SiphonReport:
    siphons: List[FrozenSet[str]]
    characterization_ok: bool
    witnesses: List[Optional[str]]
    degenerate: bool = False
    strongly_connected: bool = True


def assign_crn(model: CompartmentalModel) -> Crn:
    m = model.m
    species = tuple(f"N_{i}" for i in range(1, m + 1)) + tuple(f"S_{i}" for i in range(1, m + 1))
    reactions = []
    complex_ids: Dict[Complex, int] = {}
    for i, j in model.transitions:
        src = [0] * (2 * m)
        prod = [0] * (2 * m)
        src[i - 1] += 1
        src[m + j - 1] += 1
        prod[j - 1] += 1
        prod[m + i - 1] += 1
        reactions.append((tuple(src), tuple(prod)))
        for cplx in (tuple(src), tuple(prod)):
            complex_ids.setdefault(cplx, len(complex_ids))
    complexes = tuple(complex_ids)

    parent = list(range(len(complexes)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s, p in reactions:
        parent[find(complex_ids[s])] = find(complex_ids[p])
    classes: Dict[int, set] = {}
    for k in range(len(complexes)):
        classes.setdefault(find(k), set()).add(k)
    linkage = tuple(frozenset(c) for c in sorted(classes.values(), key=min))
    return Crn(model, species, tuple(reactions), complexes, linkage)


def exact_rank(rows: Sequence[Sequence[int]]) -> int:
    """Rank over the rationals by fraction-free (Bareiss) elimination."""
    a = [[int(x) for x in r] for r in rows]
    if not a or not a[0]:
        return 0
    n_rows, n_cols = len(a), len(a[0])
    rank = 0
    prev = 1
    for col in range(n_cols):
        pivot = next((r for r in range(rank, n_rows) if a[r][col] != 0), None)
        if pivot is None:
            continue
        a[rank], a[pivot] = a[pivot], a[rank]
        p = a[rank][col]
        for r in range(rank + 1, n_rows):
            for c in range(col + 1, n_cols):
                # exact division is guaranteed by Sylvester's identity
                a[r][c] = (p * a[r][c] - a[r][col] * a[rank][c]) // prev
            a[r][col] = 0
        prev = p
        rank += 1
        if rank == n_rows:
            break
    return rank


@dataclass(frozen=True)
class Deficiency:
    complexes: int
    linkage_classes: int
    rank: int

    @property
    def value(self) -> int:
        return self.complexes - self.linkage_classes - self.rank


def deficiency_terms(crn: Crn) -> Deficiency:
    return Deficiency(len(crn.complexes), len(crn.linkage_classes), exact_rank(crn.reaction_vectors().T.tolist()))


def deficiency_by_rank(crn: Crn) -> int:
    """Deficiency ``M - l - s`` with ``s`` the exact rank of the reaction vectors."""
    return deficiency_terms(crn).value


def _masks(crn: Crn) -> Tuple[np.ndarray, np.ndarray]:
    src = np.array([sum(1 << k for k, v in enumerate(s) if v) for s, _ in crn.reactions], dtype=np.int64)
    prod = np.array([sum(1 << k for k, v in enumerate(p) if v) for _, p in crn.reactions], dtype=np.int64)
    return src, prod


def is_siphon(crn: Crn, species: Iterable[Union[int, str]]) -> bool:
    z = _to_mask(crn, species)
    if z == 0:
        return False
    return all((s & z) for s, p in zip(*_masks(crn)) if p & z)


def _to_mask(crn: Crn, species: Iterable[Union[int, str]]) -> int:
    mask = 0
    for x in species:
        k = crn.species_index(x) if isinstance(x, str) else int(x)
        if not 0 <= k < crn.n_species:
            raise ValidationError(f"species index {k} out of range")
        mask |= 1 << k
    return mask


def _names(crn: Crn, mask: int) -> FrozenSet[str]:
    return frozenset(crn.species[k] for k in range(crn.n_species) if mask >> k & 1)


def _siphon_clause(crn: Crn, mask: int) -> Optional[str]:
    m = crn.model.m
    for i in range(m):
        if mask >> i & 1 and mask >> (m + i) & 1:
            return f"pair {i + 1}"
    all_n = (1 << m) - 1
    if mask & all_n == all_n:
        return "all N"
    if (mask >> m) & all_n == all_n:
        return "all S"
    return None


def enumerate_siphons(crn: Crn, max_species: int = 16) -> SiphonReport:
    """All minimal siphons by exhaustive subset search.

    For strongly connected models every minimal siphon is checked against the
    known characterization: it holds both species of one compartment, or all
    ``N`` species, or all ``S`` species.
    """
    n = crn.n_species
    if n > max_species:
        raise TooLarge(f"{n} species exceed the brute-force limit of {max_species}")
    src, prod = _masks(crn)
    z = np.arange(1 << n, dtype=np.int64)
    ok = z != 0
    for s, p in zip(src, prod):
        ok &= ((z & p) == 0) | ((z & s) != 0)
    # superset closure: has_sub[z] is True if some submask of z (itself included) is a siphon
    has_sub = ok.copy()
    for b in range(n):
        bit = 1 << b
        with_bit = (z & bit) != 0
        has_sub[with_bit] |= has_sub[z[with_bit] ^ bit]
    proper = np.zeros_like(ok)
    for b in range(n):
        bit = 1 << b
        with_bit = (z & bit) != 0
        proper[with_bit] |= has_sub[z[with_bit] ^ bit]
    minimal = np.flatnonzero(ok & ~proper)
    minimal = sorted(minimal.tolist(), key=lambda x: (bin(x).count("1"), x))

    strongly = connectivity(crn.model).strongly_connected
    witnesses = [_siphon_clause(crn, int(mk)) for mk in minimal]
    return SiphonReport(
        siphons=[_names(crn, int(mk)) for mk in minimal],
        characterization_ok=all(w is not None for w in witnesses),
        witnesses=witnesses,
        degenerate=not crn.reactions,
        strongly_connected=strongly,
    )


def conservation_vectors(crn: Crn) -> Dict[str, np.ndarray]:
    """Nonnegative conserved quantities shared by every network of this form."""
    m = crn.model.m
    out = {}
    for i in range(m):
        v = np.zeros(2 * m, dtype=int)
        v[i] = v[m + i] = 1
        out[f"capacity {i + 1}"] = v
    out["total N"] = np.r_[np.ones(m, dtype=int), np.zeros(m, dtype=int)]
    out["total S"] = np.r_[np.zeros(m, dtype=int), np.ones(m, dtype=int)]
    out["total"] = np.ones(2 * m, dtype=int)
    return out


def check_conserved_support(crn: Crn, siphon: Iterable[Union[int, str]]) -> bool:
    """True iff ``siphon`` contains the support of a known positive conservation law."""
    z = _to_mask(crn, siphon)
    for v in conservation_vectors(crn).values():
        support = sum(1 << k for k in np.flatnonzero(v))
        if support & z == support:
            return True
    return False


def rational_left_null_dim(crn: Crn) -> int:
    """Number of independent linear conservation laws (exact)."""
    return crn.n_species - exact_rank(crn.reaction_vectors().T.tolist())


__all__ = [
    "Crn",
    "Deficiency",
    "SiphonReport",
    "assign_crn",
    "check_conserved_support",
    "conservation_vectors",
    "deficiency_by_rank",
    "deficiency_terms",
    "enumerate_siphons",
    "exact_rank",
    "is_siphon",
]
