"""Domain types and fairness predicates for connected fair division.

Items are vertices of an undirected graph, agents hold monotone valuations
over connected bundles, and an allocation hands every agent one connected
(possibly empty) bundle so that the bundles partition the vertex set.

All values are exact rationals (Python int or Fraction); nothing in this
package touches floating point, so every comparison made by the predicates
and protocols is exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Union

Value = Union[int, Fraction]
Bundle = frozenset  # frozenset[int], vertex ids


class FairDivisionError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FairDivisionError):
    """A valuation was queried outside its domain (e.g. a disconnected bundle)."""


class ValidationError(FairDivisionError):
    """A type invariant was violated at construction or load time."""


class PreconditionError(FairDivisionError):
    """An operation was invoked on inputs it does not support."""


class TheoremViolation(FairDivisionError):
    """A machine-checked claim failed; indicates a bug, never a user error."""


def as_value(x) -> Value:
    """Normalize to an exact number: ints stay ints, everything else Fraction."""
    f = Fraction(x)
    return int(f) if f.denominator == 1 else f


def format_value(x: Value) -> str:
    return str(x)


# ---------------------------------------------------------------------------
# Item graph


@dataclass(frozen=True)
class ItemGraph:
    """Simple undirected graph over items 0..m-1.

    ``path_flag`` marks that the edge set is exactly the path
    0-1-2-...-(m-1); interval-table valuations are only defined on such
    graphs.
    """

    m: int
    edges: frozenset  # frozenset[tuple[int, int]] with a < b
    path_flag: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("graph needs at least one vertex")
        for e in self.edges:
            a, b = e
            if not (0 <= a < b < self.m):
                raise ValidationError(f"bad edge {e} for m={self.m}")
        if self.path_flag:
            expected = frozenset((j, j + 1) for j in range(self.m - 1))
            if self.edges != expected:
                raise ValidationError("path_flag set but edges are not the path")

    @staticmethod
    def path(m: int) -> "ItemGraph":
        return ItemGraph(m, frozenset((j, j + 1) for j in range(m - 1)), path_flag=True)

    @staticmethod
    def from_edges(m: int, edges: Iterable) -> "ItemGraph":
        norm = frozenset((min(a, b), max(a, b)) for a, b in edges)
        if any(a == b for a, b in norm):
            raise ValidationError("self-loops are not allowed")
        path = norm == frozenset((j, j + 1) for j in range(m - 1))
        return ItemGraph(m, norm, path_flag=path)

    @cached_property
    def neighbors(self) -> tuple:
        adj = [[] for _ in range(self.m)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return tuple(tuple(sorted(x)) for x in adj)

    def is_connected_set(self, vertices) -> bool:
        """Whether ``vertices`` induces a connected subgraph; empty counts as connected."""
        vs = frozenset(vertices)
        if len(vs) <= 1:
            return True
        it = iter(vs)
        start = next(it)
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in self.neighbors[v]:
                if w in vs and w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(vs)

    def is_connected(self) -> bool:
        return self.is_connected_set(range(self.m))

    def connected_components(self) -> list:
        seen = [False] * self.m
        comps = []
        for s in range(self.m):
            if seen[s]:
                continue
            seen[s] = True
            comp = [s]
            stack = [s]
            while stack:
                v = stack.pop()
                for w in self.neighbors[v]:
                    if not seen[w]:
                        seen[w] = True
                        comp.append(w)
                        stack.append(w)
            comps.append(frozenset(comp))
        return comps


def removable_items(bundle: Bundle, graph: ItemGraph) -> list:
    """Items whose removal leaves the bundle connected (the outer goods).

    For a nonempty connected bundle at least one such item exists: any
    non-cut vertex of the induced subgraph.
    """
    return sorted(x for x in bundle if graph.is_connected_set(bundle - {x}))


# ---------------------------------------------------------------------------
# Valuations


class AdditiveValuation:
    """Additive valuation: the value of a bundle is the sum of its item values.

    >>> v = AdditiveValuation([2, 1, 3, 1])
    >>> g = ItemGraph.path(4)
    >>> v.value(frozenset({2, 3}), g)
    4
    """

    kind = "additive"

    def __init__(self, item_values):
        vals = tuple(as_value(x) for x in item_values)
        if any(x < 0 for x in vals):
            raise ValidationError("additive item values must be nonnegative")
        self.item_values = vals
        prefix = [0]
        for x in vals:
            prefix.append(prefix[-1] + x)
        self._prefix = tuple(prefix)

    @property
    def m(self) -> int:
        return len(self.item_values)

    def value(self, bundle: Bundle, graph: ItemGraph) -> Value:
        if not bundle:
            return 0
        if not all(0 <= x < self.m for x in bundle):
            raise DomainError("bundle contains unknown items")
        if not graph.is_connected_set(bundle):
            raise DomainError(f"bundle {sorted(bundle)} is disconnected")
        return sum(self.item_values[x] for x in bundle)

    def interval_value(self, lo: int, hi: int) -> Value:
        """Value of the contiguous id range lo..hi (inclusive); empty if lo > hi."""
        if lo > hi:
            return 0
        return self._prefix[hi + 1] - self._prefix[lo]

    def __eq__(self, other):
        return isinstance(other, AdditiveValuation) and self.item_values == other.item_values

    def __repr__(self):
        return f"AdditiveValuation({list(self.item_values)!r})"


class IntervalTableValuation:
    """Monotone valuation over the intervals of a path, given as a full table.

    The table maps (lo, hi) with 0 <= lo <= hi < m to a nonnegative value;
    the empty bundle is worth 0. Monotonicity over nested intervals is
    validated eagerly: extending an interval by one item never lowers its
    value, which by transitivity covers every nested pair.
    """

    kind = "interval_table"

    def __init__(self, m: int, table: dict):
        if m < 1:
            raise ValidationError("interval table needs at least one item")
        self.m = m
        norm = {}
        for (lo, hi), val in table.items():
            if not (0 <= lo <= hi < m):
                raise ValidationError(f"bad interval ({lo}, {hi}) for m={m}")
            norm[(lo, hi)] = as_value(val)
        for lo in range(m):
            for hi in range(lo, m):
                if (lo, hi) not in norm:
                    raise ValidationError(f"table is missing interval ({lo}, {hi})")
        for lo in range(m):
            if norm[(lo, lo)] < 0:
                raise ValidationError("interval values must be nonnegative")
        for lo in range(m):
            for hi in range(lo, m):
                v = norm[(lo, hi)]
                if lo > 0 and norm[(lo - 1, hi)] < v:
                    raise ValidationError(
                        f"monotonicity violated: u({lo - 1}..{hi}) < u({lo}..{hi})")
                if hi < m - 1 and norm[(lo, hi + 1)] < v:
                    raise ValidationError(
                        f"monotonicity violated: u({lo}..{hi + 1}) < u({lo}..{hi})")
        self.table = norm

    def value(self, bundle: Bundle, graph: ItemGraph) -> Value:
        if not bundle:
            return 0
        lo, hi = min(bundle), max(bundle)
        if hi - lo + 1 != len(bundle):
            raise DomainError(f"bundle {sorted(bundle)} is not an interval")
        if hi >= self.m:
            raise DomainError("bundle contains unknown items")
        return self.table[(lo, hi)]

    def interval_value(self, lo: int, hi: int) -> Value:
        if lo > hi:
            return 0
        return self.table[(lo, hi)]

    def __eq__(self, other):
        return (isinstance(other, IntervalTableValuation)
                and self.m == other.m and self.table == other.table)

    def __repr__(self):
        return f"IntervalTableValuation(m={self.m}, <{len(self.table)} entries>)"


Valuation = Union[AdditiveValuation, IntervalTableValuation]


def value(valuation: Valuation, bundle: Bundle, graph: ItemGraph) -> Value:
    """u(bundle) for a connected bundle; the empty bundle is worth 0."""
    return valuation.value(frozenset(bundle), graph)


def up_to_one_value(valuation: Valuation, bundle: Bundle, graph: ItemGraph) -> Value:
    """The bundle's value after deleting its least harmful outer good.

    Zero for the empty bundle, otherwise the minimum of u(bundle - {x}) over
    items x whose removal leaves the bundle connected.

    >>> g = ItemGraph.path(4)
    >>> up_to_one_value(AdditiveValuation([2, 1, 3, 1]), frozenset({2, 3}), g)
    1
    """
    b = frozenset(bundle)
    if not b:
        return 0
    if not graph.is_connected_set(b):
        raise DomainError(f"bundle {sorted(b)} is disconnected")
    outer = removable_items(b, graph)
    return min(valuation.value(b - {x}, graph) for x in outer)


def values_agree(v1: Valuation, v2: Valuation, graph: ItemGraph) -> bool:
    """Whether two valuations agree on every connected bundle of the graph."""
    if isinstance(v1, AdditiveValuation) and isinstance(v2, AdditiveValuation):
        return v1.item_values == v2.item_values
    if graph.path_flag:
        return all(v1.interval_value(lo, hi) == v2.interval_value(lo, hi)
                   for lo in range(graph.m) for hi in range(lo, graph.m))
    raise PreconditionError("cannot compare non-additive valuations off a path")


# ---------------------------------------------------------------------------
# Instances and allocations


@dataclass(frozen=True)
class Instance:
    """An item graph together with one valuation per agent."""

    graph: ItemGraph
    valuations: tuple

    def __post_init__(self):
        if len(self.valuations) < 1:
            raise ValidationError("an instance needs at least one agent")
        for v in self.valuations:
            if isinstance(v, IntervalTableValuation):
                if not self.graph.path_flag:
                    raise ValidationError("interval-table valuations require a path graph")
                if v.m != self.graph.m:
                    raise ValidationError("valuation size does not match the graph")
            elif isinstance(v, AdditiveValuation):
                if v.m != self.graph.m:
                    raise ValidationError("valuation size does not match the graph")
            else:
                raise ValidationError(f"unknown valuation type {type(v)!r}")

    @property
    def n(self) -> int:
        return len(self.valuations)

    @property
    def m(self) -> int:
        return self.graph.m

    def has_identical_valuations(self) -> bool:
        return all(values_agree(self.valuations[0], v, self.graph)
                   for v in self.valuations[1:])


def path_instance(profiles) -> Instance:
    """Convenience: additive agents over a path, one value list per agent."""
    profiles = [list(p) for p in profiles]
    m = len(profiles[0])
    return Instance(ItemGraph.path(m), tuple(AdditiveValuation(p) for p in profiles))


def identical_path_instance(values, n: int) -> Instance:
    return path_instance([list(values)] * n)


@dataclass(frozen=True)
class Allocation:
    """Ordered bundles, one per agent; index i is agent i's bundle."""

    bundles: tuple  # tuple[frozenset[int], ...]

    @staticmethod
    def of(*bundles) -> "Allocation":
        return Allocation(tuple(frozenset(b) for b in bundles))

    def validate(self, instance: Instance) -> None:
        """Raise ValidationError unless this is a valid connected allocation."""
        if len(self.bundles) != instance.n:
            raise ValidationError(
                f"allocation has {len(self.bundles)} bundles for {instance.n} agents")
        seen = set()
        for i, b in enumerate(self.bundles):
            if not all(0 <= x < instance.m for x in b):
                raise ValidationError(f"bundle {i} contains unknown items")
            if seen & b:
                raise ValidationError(f"bundle {i} overlaps an earlier bundle")
            seen |= b
            if not instance.graph.is_connected_set(b):
                raise ValidationError(f"bundle {i} = {sorted(b)} is disconnected")
        if len(seen) != instance.m:
            missing = sorted(set(range(instance.m)) - seen)
            raise ValidationError(f"items {missing} are unallocated")


# ---------------------------------------------------------------------------
# Fairness predicates.  All of them assume the allocation is valid for the
# instance; use Allocation.validate first on untrusted input.


def is_envy_free(instance: Instance, allocation: Allocation) -> bool:
    """No agent values another bundle above their own."""
    g = instance.graph
    for i, vi in enumerate(instance.valuations):
        own = vi.value(allocation.bundles[i], g)
        for j, bj in enumerate(allocation.bundles):
            if i != j and own < vi.value(bj, g):
                return False
    return True


def is_ef1(instance: Instance, allocation: Allocation) -> bool:
    """Envy-free up to one outer good.

    Agent i may envy bundle j only if deleting some single item, whose
    removal leaves bundle j connected, kills the envy.

    >>> inst = identical_path_instance([2, 1, 3, 1], 2)
    >>> is_ef1(inst, Allocation.of({0, 1}, {2, 3}))
    True
    >>> is_ef1(inst, Allocation.of({0}, {1, 2, 3}))
    False
    """
    g = instance.graph
    reduced = [up_to_one_cache(instance, b) for b in allocation.bundles]
    for i, vi in enumerate(instance.valuations):
        own = vi.value(allocation.bundles[i], g)
        for j in range(instance.n):
            if i == j or not allocation.bundles[j]:
                continue
            if own < reduced[j](vi):
                return False
    return True


def up_to_one_cache(instance: Instance, bundle: Bundle):
    """Per-bundle closure computing u_i^-(bundle) for each agent's valuation."""
    g = instance.graph
    if not bundle:
        return lambda v: 0
    outer = removable_items(bundle, g)
    options = [bundle - {x} for x in outer]
    return lambda v: min(v.value(o, g) for o in options)


def _outer_pairs(bundle: Bundle, graph: ItemGraph):
    """Pairs of distinct outer goods whose joint removal leaves the bundle connected."""
    outer = removable_items(bundle, graph)
    for x, y in itertools.combinations(outer, 2):
        if graph.is_connected_set(bundle - {x, y}):
            yield bundle - {x, y}


def is_ef2(instance: Instance, allocation: Allocation) -> bool:
    """Envy-free up to two outer goods.

    Bundles of size at most one are never envied in this sense; otherwise
    there must be two distinct items, each individually removable without
    disconnecting the bundle and jointly leaving a connected remainder,
    whose deletion kills the envy.
    """
    g = instance.graph
    remainders = [
        list(_outer_pairs(b, g)) if len(b) >= 2 else None
        for b in allocation.bundles
    ]
    for i, vi in enumerate(instance.valuations):
        own = vi.value(allocation.bundles[i], g)
        for j in range(instance.n):
            if i == j or remainders[j] is None:
                continue
            if not any(own >= vi.value(r, g) for r in remainders[j]):
                return False
    return True


def is_efx(instance: Instance, allocation: Allocation) -> bool:
    """Envy-free up to any outer good: every connectivity-preserving single
    deletion from the envied bundle must kill the envy."""
    g = instance.graph
    reduced = [[b - {x} for x in removable_items(b, g)] for b in allocation.bundles]
    for i, vi in enumerate(instance.valuations):
        own = vi.value(allocation.bundles[i], g)
        for j in range(instance.n):
            if i == j:
                continue
            if any(own < vi.value(r, g) for r in reduced[j]):
                return False
    return True


CRITERIA = {
    "EF": is_envy_free,
    "EF1": is_ef1,
    "EF2": is_ef2,
    "EFX": is_efx,
}
