"""Ground truth by exhaustive search, plus random instance generators.

Everything here is deliberately simple and complete: enumerate every
connected allocation, search for allocations meeting a fairness criterion,
compute exact maximin shares, and generate reproducible random instances.
Desk scale only (roughly m <= 12 on general graphs).
"""

from __future__ import annotations

import concurrent.futures
import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .core import (
    CRITERIA,
    AdditiveValuation,
    Allocation,
    Instance,
    IntervalTableValuation,
    ItemGraph,
    PreconditionError,
    as_value,
)


# ---------------------------------------------------------------------------
# Enumeration


def _connected_supersets(graph: ItemGraph, pivot: int, allowed: frozenset):
    """All connected vertex sets S with pivot in S, S a subset of allowed.

    Standard frontier recursion: each extension step either takes or
    permanently bans the next frontier vertex, so every set appears once.
    """
    adj = graph.neighbors

    def grow(current, frontier, banned):
        yield current
        fr = sorted(frontier)
        for idx, v in enumerate(fr):
            new_banned = banned | set(fr[:idx])
            new_current = current | {v}
            new_frontier = (frontier | {w for w in adj[v] if w in allowed}) \
                - new_current - new_banned
            new_frontier.discard(v)
            yield from grow(new_current, new_frontier, new_banned)

    start_frontier = {w for w in adj[pivot] if w in allowed}
    yield from grow(frozenset({pivot}), start_frontier, set())


def connected_set_partitions(graph: ItemGraph, max_parts: int):
    """Partitions of all vertices into at most max_parts nonempty connected
    blocks, each listed once with blocks ordered by their minimum vertex."""

    def rec(remaining, parts_left):
        if not remaining:
            yield []
            return
        if parts_left == 0:
            return
        pivot = min(remaining)
        for block in _connected_supersets(graph, pivot, remaining):
            for rest in rec(remaining - block, parts_left - 1):
                yield [block] + rest

    yield from rec(frozenset(range(graph.m)), max_parts)


def enumerate_connected_allocations(graph: ItemGraph, n: int):
    """Every allocation of all vertices into n labeled connected bundles.

    Empty bundles are allowed; each allocation appears exactly once, in a
    fixed canonical order (partition blocks by minimum vertex, then the
    lexicographic choice of which agents receive them).
    """
    if n < 1:
        raise PreconditionError("need at least one agent")
    for blocks in connected_set_partitions(graph, n):
        k = len(blocks)
        for owners in itertools.permutations(range(n), k):
            bundles = [frozenset()] * n
            for block, agent in zip(blocks, owners):
                bundles[agent] = block
            yield Allocation(tuple(bundles))


def count_path_allocations(m: int, n: int) -> int:
    """Closed form for paths: split into k intervals, assign to k of n agents."""
    return sum(
        math.comb(m - 1, k - 1) * math.perm(n, k)
        for k in range(1, min(m, n) + 1)
    )


def exists_fair(instance: Instance, criterion: str, parallel: bool = False):
    """First allocation (canonical order) satisfying the criterion, or None.

    In parallel mode the search is split over the possible first blocks and
    any hit may be returned; existence/nonexistence answers are identical.
    """
    predicate = CRITERIA[criterion]
    if parallel:
        return _exists_fair_parallel(instance, criterion)
    for alloc in enumerate_connected_allocations(instance.graph, instance.n):
        if predicate(instance, alloc):
            return alloc
    return None


def _first_blocks(graph: ItemGraph):
    everything = frozenset(range(graph.m))
    return list(_connected_supersets(graph, 0, everything))


def _search_branch(instance: Instance, criterion: str, block):
    predicate = CRITERIA[criterion]
    graph = instance.graph
    n = instance.n
    remaining = frozenset(range(graph.m)) - block

    def rec(rem, parts_left):
        if not rem:
            yield []
            return
        if parts_left == 0:
            return
        pivot = min(rem)
        for blk in _connected_supersets(graph, pivot, rem):
            for rest in rec(rem - blk, parts_left - 1):
                yield [blk] + rest

    for rest in rec(remaining, n - 1):
        blocks = [block] + rest
        for owners in itertools.permutations(range(n), len(blocks)):
            bundles = [frozenset()] * n
            for blk, agent in zip(blocks, owners):
                bundles[agent] = blk
            alloc = Allocation(tuple(bundles))
            if predicate(instance, alloc):
                return alloc
    return None


def _exists_fair_parallel(instance: Instance, criterion: str):
    branches = _first_blocks(instance.graph)
    with concurrent.futures.ProcessPoolExecutor() as pool:
        futures = [pool.submit(_search_branch, instance, criterion, b) for b in branches]
        hit = None
        for fut in concurrent.futures.as_completed(futures):
            result = fut.result()
            if result is not None:
                hit = result
                for other in futures:
                    other.cancel()
                break
    return hit


# ---------------------------------------------------------------------------
# Maximin share


@dataclass(frozen=True)
class MmsReport:
    """Per-agent maximin share values with witnessing partitions."""

    values: tuple          # tuple[Value, ...]
    witnesses: tuple       # tuple[tuple[frozenset, ...], ...], n bundles each

    def alpha(self, instance: Instance, allocation: Allocation):
        """Per-agent ratio of received value to MMS; inf when MMS is zero."""
        out = []
        for i, v in enumerate(instance.valuations):
            got = v.value(allocation.bundles[i], instance.graph)
            if self.values[i] == 0:
                out.append(math.inf)
            else:
                out.append(as_value(Fraction(got, 1) / self.values[i]))
        return tuple(out)


def mms(instance: Instance) -> MmsReport:
    """Exact maximin shares over connected n-partitions.

    Empty bundles are allowed in the partition space; they force the minimum
    to zero, so they only matter when no partition into n nonempty connected
    bundles exists (then the MMS is 0 with a degenerate witness).
    """
    n, graph = instance.n, instance.graph
    best = [None] * n
    witness = [None] * n
    fallback = None
    for blocks in connected_set_partitions(graph, n):
        padded = tuple(blocks) + (frozenset(),) * (n - len(blocks))
        if fallback is None:
            fallback = padded
        if len(blocks) < n:
            continue
        for i, v in enumerate(instance.valuations):
            worst = min(v.value(b, graph) for b in blocks)
            if best[i] is None or worst > best[i]:
                best[i] = worst
                witness[i] = padded
    if fallback is None:
        raise PreconditionError(
            f"no partition of the graph into {n} connected bundles exists")
    values = tuple(0 if b is None else b for b in best)
    witnesses = tuple(fallback if w is None else w for w in witness)
    return MmsReport(values=values, witnesses=witnesses)


def alpha_mms_check(instance: Instance, allocation: Allocation):
    """Per-agent alpha such that the agent received alpha * MMS."""
    return mms(instance).alpha(instance, allocation)


# ---------------------------------------------------------------------------
# Random instance generators


GEN_KINDS = ("additive", "binary_additive", "interval_table_monotone", "subadditive")


def gen_random(kind: str, m: int, n: int, seed: int) -> Instance:
    """Deterministic random instance of the requested family.

    additive: item values uniform in 0..10.
    binary_additive: item values in {0, 1}.
    interval_table_monotone: path instance; each agent's interval table is
        built by nonnegative random increments over one-item extensions,
        with strictly positive singletons, so u is monotone and positive on
        nonempty intervals.
    subadditive: path instance; u(I) = min(additive sum, cap) for a random
        per-agent cap, which is monotone and subadditive.
    """
    rng = random.Random((kind, m, n, seed).__repr__())
    if kind == "additive":
        return Instance(ItemGraph.path(m), tuple(
            AdditiveValuation([rng.randint(0, 10) for _ in range(m)])
            for _ in range(n)))
    if kind == "binary_additive":
        return Instance(ItemGraph.path(m), tuple(
            AdditiveValuation([rng.randint(0, 1) for _ in range(m)])
            for _ in range(n)))
    if kind == "interval_table_monotone":
        return Instance(ItemGraph.path(m), tuple(
            _random_monotone_table(m, rng) for _ in range(n)))
    if kind == "subadditive":
        return Instance(ItemGraph.path(m), tuple(
            _random_subadditive_table(m, rng) for _ in range(n)))
    raise PreconditionError(f"unknown generator kind {kind!r}")


def _random_monotone_table(m: int, rng: random.Random) -> IntervalTableValuation:
    table = {}
    for i in range(m):
        table[(i, i)] = rng.randint(1, 6)
    for length in range(2, m + 1):
        for lo in range(0, m - length + 1):
            hi = lo + length - 1
            floor = max(table[(lo + 1, hi)], table[(lo, hi - 1)])
            table[(lo, hi)] = floor + rng.randint(0, 4)
    return IntervalTableValuation(m, table)


def _random_subadditive_table(m: int, rng: random.Random) -> IntervalTableValuation:
    items = [rng.randint(0, 6) for _ in range(m)]
    total = sum(items)
    cap = rng.randint(1, max(1, total))
    table = {}
    for lo in range(m):
        running = 0
        for hi in range(lo, m):
            running += items[hi]
            table[(lo, hi)] = min(running, cap)
    return IntervalTableValuation(m, table)


def random_allocations(instance: Instance, count: int, seed: int):
    """A reproducible sample of valid allocations (with replacement)."""
    pool = list(enumerate_connected_allocations(instance.graph, instance.n))
    rng = random.Random(seed)
    return [pool[rng.randrange(len(pool))] for _ in range(count)]
