"""Strong-effect-heredity lattice over (effect set, resolution) pairs.

An :class:`EffectResolution` ``(u, r)`` names one group of basis functions:
the component of the functional ANOVA that depends on the inputs in ``u``
(1-based indices) represented at resolution level ``r``. Its parents are
``(u, r - 1)`` and every ``(u \\ {j}, r)``; a pair may enter the candidate set
only once all of its parents are active.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import total_ordering
from itertools import combinations
from typing import Iterable, Mapping

from .errors import MRFAError


@total_ordering
@dataclass(frozen=True)
class EffectResolution:
    u: tuple
    r: int

    def __post_init__(self):
        u = tuple(sorted(int(j) for j in self.u))
        if not u:
            raise ValueError("effect set must be nonempty")
        if len(set(u)) != len(u) or u[0] < 1:
            raise ValueError(f"invalid effect set {self.u!r}")
        if int(self.r) < 1:
            raise ValueError(f"resolution level must be >= 1, got {self.r}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "r", int(self.r))

    @property
    def order(self):
        return len(self.u)

    def sort_key(self):
        return (len(self.u), self.u, self.r)

    def __lt__(self, other):
        if not isinstance(other, EffectResolution):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    def __repr__(self):
        inner = ",".join(str(j) for j in self.u)
        return f"({{{inner}}},{self.r})"

    def is_ancestor_of(self, other):
        """True when ``self`` is contained in ``other``'s group (v ⊆ u, s ≤ r)."""
        return set(self.u) <= set(other.u) and self.r <= other.r


def parents(g):
    """Immediate parents of ``g`` under strong heredity."""
    out = set()
    if g.r > 1:
        out.add(EffectResolution(g.u, g.r - 1))
    if len(g.u) > 1:
        for j in g.u:
            out.add(EffectResolution(tuple(i for i in g.u if i != j), g.r))
    return out


def children(g, d, d_max, r_max):
    """Immediate children of ``g`` inside the lattice bounds."""
    out = set()
    if g.r < r_max:
        out.add(EffectResolution(g.u, g.r + 1))
    if len(g.u) < d_max:
        for j in range(1, d + 1):
            if j not in g.u:
                out.add(EffectResolution(g.u + (j,), g.r))
    return out


def ancestors(g):
    """All ``(v, s)`` with nonempty ``v ⊆ u`` and ``s ≤ r``, including ``g``."""
    out = []
    for size in range(1, len(g.u) + 1):
        for v in combinations(g.u, size):
            for s in range(1, g.r + 1):
                out.append(EffectResolution(v, s))
    return sorted(out)


def is_heredity_closed(groups):
    s = set(groups)
    return all(parents(g) <= s for g in s)


def downward_closure(groups):
    """Smallest heredity-closed set containing ``groups``."""
    out = set()
    for g in groups:
        out.update(ancestors(g))
    return out


def initial_candidates(d):
    return {EffectResolution((j,), 1) for j in range(1, d + 1)}


def expand_candidates(active, candidates, d, d_max, r_max):
    """Add every pair whose parents are all active; never removes anything."""
    active = set(active)
    out = set(candidates)
    for g in active:
        for c in children(g, d, d_max, r_max):
            if c not in out and parents(c) <= active:
                out.add(c)
    return out


@dataclass
class GroupStructure:
    """Candidate/active sets plus the overlapping-group bookkeeping.

    ``atom_counts`` maps each registered pair to its number of basis
    functions ``n_u(r)``.
    """

    d: int
    d_max: int
    r_max: int
    candidates: set = field(default_factory=set)
    active: set = field(default_factory=set)
    atom_counts: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, d, d_max, r_max, atom_counts=None):
        gs = cls(d=d, d_max=d_max, r_max=r_max)
        gs.candidates = initial_candidates(d)
        if atom_counts:
            gs.atom_counts.update(atom_counts)
        return gs

    def register(self, g, count):
        self.atom_counts[g] = int(count)

    def weight(self, g):
        return group_weight(g, self.atom_counts)

    def members(self, g):
        """Pairs whose coefficients the group ``g`` penalizes jointly."""
        return ancestors(g)

    def replicate_count(self, v):
        """Number of candidate groups containing the coefficients of ``v``."""
        return sum(1 for g in self.candidates if v.is_ancestor_of(g))

    def expand(self):
        new = expand_candidates(self.active, self.candidates, self.d,
                                self.d_max, self.r_max)
        added = new - self.candidates
        self.candidates = new
        return added

    def check(self):
        if not self.active <= self.candidates:
            raise MRFAError("active set is not contained in the candidates")
        if not is_heredity_closed(self.candidates):
            raise MRFAError("candidate set is not heredity-closed")


def group_weight(g, atom_counts: Mapping):
    """``N_u(r)``: total atom count over every ``(v, s)`` in the group."""
    total = 0
    for a in ancestors(g):
        if a not in atom_counts:
            raise MRFAError(f"no atom count registered for {a!r}")
        total += int(atom_counts[a])
    return total


def canonical(groups: Iterable):
    return sorted(groups)
