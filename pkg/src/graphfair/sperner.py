"""Sperner machinery for EF2 (any n) and EF1 (n = 4) allocations on paths.

A knife position places n-1 knives at integral or half-integral points of
the path 1..m; an integral coordinate covers its item, which then belongs
to no bundle. Positions are stored in half-units (h = 2x, so the grid is
the integers 1..2m+1 and even values are covering knives). The half-step
Kuhn chains (a base vertex plus an order in which each knife moves once)
are the elementary simplices of the triangulation.

Each agent labels a knife position with a bundle index they like best
there; a fully-labeled chain, whose existence the generalized Sperner
lemma guarantees, rounds into an EF2 allocation, or with the four-agent
virtual valuations into an EF1 allocation. The search here is exhaustive
enumeration in a fixed canonical order, so a returned certificate doubles
as a machine check of the existence theorem.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .core import (
    AdditiveValuation,
    Allocation,
    Instance,
    IntervalTableValuation,
    ItemGraph,
    PreconditionError,
    TheoremViolation,
    up_to_one_value,
)


@dataclass(frozen=True)
class KnifePosition:
    """n-1 nondecreasing knife coordinates over a path of m items, half-integral."""

    m: int
    half_units: tuple  # tuple[int, ...], each in 1..2m+1, nondecreasing

    def __post_init__(self):
        h = self.half_units
        if any(not 1 <= x <= 2 * self.m + 1 for x in h):
            raise PreconditionError("knife coordinate out of range")
        if any(a > b for a, b in zip(h, h[1:])):
            raise PreconditionError("knife coordinates must be nondecreasing")

    @property
    def coords(self) -> tuple:
        return tuple(Fraction(x, 2) for x in self.half_units)

    @property
    def covered(self) -> frozenset:
        """Ids of items sitting exactly under a knife."""
        return frozenset(x // 2 - 1 for x in self.half_units if x % 2 == 0)


def _bounds(h, m: int, n: int):
    """Per-bundle (lo, hi) id ranges of the open intervals between knives."""
    ext = (1,) + tuple(h) + (2 * m + 1,)
    out = []
    for b in range(n):
        lo = ext[b] // 2          # first id strictly right of the left knife
        hi = (ext[b + 1] - 1) // 2 - 1  # last id strictly left of the right knife
        out.append((lo, hi))
    return out


@dataclass(frozen=True)
class PartialPartition:
    """The bundles a knife position induces; covered items are in none."""

    bundles: tuple  # tuple[frozenset, ...]
    covered: frozenset


def partial_partition(x: KnifePosition, m: int, n: int) -> PartialPartition:
    """Open intervals strictly between consecutive knives, as item-id sets.

    >>> p = partial_partition(KnifePosition(4, (4,)), 4, 2)
    >>> sorted(p.bundles[0]), sorted(p.bundles[1]), sorted(p.covered)
    ([0], [2, 3], [1])
    """
    if len(x.half_units) != n - 1 or x.m != m:
        raise PreconditionError("knife position does not match (m, n)")
    bundles = tuple(
        frozenset(range(lo, hi + 1)) for lo, hi in _bounds(x.half_units, m, n)
    )
    return PartialPartition(bundles=bundles, covered=x.covered)


def enumerate_knife_positions(m: int, n: int):
    """All triangulation vertices, in lexicographic order."""
    grid = range(1, 2 * m + 2)
    for h in itertools.combinations_with_replacement(grid, n - 1):
        yield KnifePosition(m, h)


@dataclass(frozen=True)
class ElementarySimplex:
    """A Kuhn cell: base vertex plus the order in which each knife half-steps."""

    base: KnifePosition
    step_order: tuple  # permutation of the n-1 knife indices

    def chain(self):
        """The n chain vertices, or None if the cell leaves the simplex."""
        m = self.base.m
        cur = list(self.base.half_units)
        k = len(cur)
        out = [tuple(cur)]
        for c in self.step_order:
            cur[c] += 1
            if cur[c] > 2 * m + 1 or (c + 1 < k and cur[c] > cur[c + 1]):
                return None
            out.append(tuple(cur))
        return out


def enumerate_elementary_simplices(m: int, n: int):
    """All Kuhn cells inside the simplex, canonical (base, step order) order."""
    for base in enumerate_knife_positions(m, n):
        for pi in itertools.permutations(range(n - 1)):
            cell = ElementarySimplex(base, pi)
            if cell.chain() is not None:
                yield cell


# ---------------------------------------------------------------------------
# Labelings


def _require_path(instance: Instance):
    if not instance.graph.path_flag:
        raise PreconditionError("Sperner machinery runs on path instances")


def ef2_label(instance: Instance, agent: int, x: KnifePosition) -> int:
    """Index of a most-preferred nonempty bundle (lowest index on ties)."""
    return _ef2_label_h(instance, agent, x.half_units)


def _ef2_label_h(instance: Instance, agent: int, h) -> int:
    n, m = instance.n, instance.m
    v = instance.valuations[agent]
    best, best_val = None, None
    for idx, (lo, hi) in enumerate(_bounds(h, m, n)):
        if lo > hi:
            continue
        val = v.interval_value(lo, hi)
        if best is None or val > best_val:
            best, best_val = idx, val
    if best is None:
        raise PreconditionError("all bundles empty; need m >= n")
    return best


def virtual_valuation(instance: Instance, agent: int, x: KnifePosition, bundle: int):
    """Four-agent bundle value anticipating how boundary items will round.

    End bundles ignore the item next to a non-covering knife; an interior
    bundle flanked by two covering knives is valued as the closed interval
    between them minus its cheaper endpoint. Everything else is just the
    value of the open bundle.
    """
    if instance.n != 4:
        raise PreconditionError("virtual valuations are defined for four agents")
    return _virtual_h(instance, agent, x.half_units, bundle)


def _virtual_h(instance: Instance, agent: int, h, b: int):
    m = instance.m
    v = instance.valuations[agent]
    if b == 0:
        h1 = h[0]
        last = h1 // 2 - 2 if h1 % 2 == 0 else (h1 - 3) // 2 - 1
        return v.interval_value(0, last)
    if b == 3:
        h3 = h[2]
        first = h3 // 2 if h3 % 2 == 0 else (h3 + 3) // 2 - 1
        return v.interval_value(first, m - 1)
    hl, hr = h[b - 1], h[b]
    if hl % 2 == 0 and hr % 2 == 0:
        lo, hi = hl // 2 - 1, hr // 2 - 1  # the two covered items
        if lo == hi:
            return 0
        return min(v.interval_value(lo + 1, hi), v.interval_value(lo, hi - 1))
    lo, hi = _bounds(h, m, 4)[b]
    return v.interval_value(lo, hi)


def ef1_four_label(instance: Instance, agent: int, x: KnifePosition) -> int:
    """Argmax bundle of the virtual valuation, lowest index on ties."""
    if instance.n != 4:
        raise PreconditionError("the four-agent labeling needs n = 4")
    return _ef1_four_label_h(instance, agent, x.half_units)


def _ef1_four_label_h(instance: Instance, agent: int, h) -> int:
    best, best_val = None, None
    for b in range(4):
        val = _virtual_h(instance, agent, h, b)
        if best is None or val > best_val:
            best, best_val = b, val
    return best


LABELERS = {"ef2": _ef2_label_h, "ef1_four": _ef1_four_label_h}


def _resolve_labeler(instance: Instance, labeler):
    if callable(labeler):
        return labeler
    try:
        fn = LABELERS[labeler]
    except KeyError:
        raise PreconditionError(f"unknown labeler {labeler!r}") from None
    if labeler == "ef1_four" and instance.n != 4:
        raise PreconditionError("the ef1_four labeler needs exactly four agents")
    return lambda agent, h: fn(instance, agent, h)


def verify_proper(labeler, instance: Instance) -> bool:
    """Exhaustively check the two properness conditions of a labeling.

    Every main vertex of the simplex must be labeled with its own bundle
    index, and no vertex on the face where bundle j is empty may be labeled
    j. Checked for every agent over the entire half-integral grid.
    """
    _require_path(instance)
    n, m = instance.n, instance.m
    fn = _resolve_labeler(instance, labeler)
    top = 2 * m + 1
    for b in range(n):
        h = tuple([1] * b + [top] * (n - 1 - b))
        for agent in range(n):
            if fn(agent, h) != b:
                return False
    for x in enumerate_knife_positions(m, n):
        h = x.half_units
        ext = (1,) + h + (top,)
        empty = [b for b in range(n) if ext[b] == ext[b + 1]]
        if not empty:
            continue
        for agent in range(n):
            label = fn(agent, h)
            if label in empty:
                return False
    return True


# ---------------------------------------------------------------------------
# Fully-labeled search


@dataclass(frozen=True)
class SpernerSequence:
    """A fully-labeled Kuhn chain with everything needed to round it.

    ``sigma`` sends each agent to their chain vertex, ``phi`` to the bundle
    index they pick there; ``boundary_items`` holds the covered item of each
    knife and ``knife_cases`` whether the knife ends ('a') or starts ('b')
    on its item along the chain. ``basic_bundles`` are the per-index
    intersections across the chain.
    """

    instance_m: int
    n: int
    labeler: str
    chain: tuple           # tuple[KnifePosition, ...]
    sigma: tuple           # agent -> chain vertex index
    phi: tuple             # agent -> bundle index
    partitions: tuple      # tuple[PartialPartition, ...]
    boundary_items: tuple  # item id per knife
    basic_bundles: tuple   # tuple[frozenset, ...]
    knife_cases: tuple     # 'a' | 'b' per knife

    def validate(self, instance: Instance) -> None:
        n, m = self.n, self.instance_m
        fn = _resolve_labeler(instance, self.labeler)
        if sorted(self.sigma) != list(range(n)) or sorted(self.phi) != list(range(n)):
            raise TheoremViolation("sigma and phi must both be permutations")
        for i in range(n):
            if fn(i, self.chain[self.sigma[i]].half_units) != self.phi[i]:
                raise TheoremViolation("stored labels disagree with the labeler")
        for step in range(n - 1):
            a = self.chain[step].half_units
            b = self.chain[step + 1].half_units
            diff = [c for c in range(n - 1) if a[c] != b[c]]
            if len(diff) != 1 or b[diff[0]] - a[diff[0]] != 1:
                raise TheoremViolation("chain vertices must differ by one half step")
        for c in range(n - 1):
            vals = {x.half_units[c] for x in self.chain}
            if len(vals) != 2:
                raise TheoremViolation("each knife must take exactly two positions")
            evens = [v for v in vals if v % 2 == 0]
            if len(evens) != 1:
                raise TheoremViolation("each knife must cover exactly one item")
            if evens[0] // 2 - 1 != self.boundary_items[c]:
                raise TheoremViolation("boundary item mismatch")
            case = "a" if evens[0] == max(vals) else "b"
            if case != self.knife_cases[c]:
                raise TheoremViolation("knife case mismatch")
        for j in range(n):
            basic = frozenset.intersection(*(p.bundles[j] for p in self.partitions))
            if basic != self.basic_bundles[j]:
                raise TheoremViolation("basic bundle mismatch")
            hull = set(basic)
            if j > 0:
                hull.add(self.boundary_items[j - 1])
            if j < n - 1:
                hull.add(self.boundary_items[j])
            for p in self.partitions:
                if not (basic <= p.bundles[j] <= hull):
                    raise TheoremViolation("bundle escapes its boundary sandwich")

    def to_record(self) -> dict:
        return {
            "labeler": self.labeler,
            "n": self.n,
            "m": self.instance_m,
            "chain": [[str(c) for c in x.coords] for x in self.chain],
            "sigma": list(self.sigma),
            "phi": list(self.phi),
            "boundary_items": list(self.boundary_items),
            "basic_bundles": [sorted(b) for b in self.basic_bundles],
            "knife_cases": list(self.knife_cases),
            "partitions": [
                {"bundles": [sorted(b) for b in p.bundles],
                 "covered": sorted(p.covered)}
                for p in self.partitions
            ],
        }


def _sequence_from_chain(instance: Instance, labeler: str, chain, sigma, phi) -> SpernerSequence:
    n, m = instance.n, instance.m
    positions = tuple(KnifePosition(m, h) for h in chain)
    partitions = tuple(partial_partition(x, m, n) for x in positions)
    boundary = []
    cases = []
    for c in range(n - 1):
        vals = sorted({h[c] for h in chain})
        even = vals[0] if vals[0] % 2 == 0 else vals[1]
        boundary.append(even // 2 - 1)
        cases.append("a" if even == vals[1] else "b")
    basics = tuple(
        frozenset.intersection(*(p.bundles[j] for p in partitions)) for j in range(n)
    )
    seq = SpernerSequence(
        instance_m=m, n=n, labeler=labeler, chain=positions,
        sigma=tuple(sigma), phi=tuple(phi), partitions=partitions,
        boundary_items=tuple(boundary), basic_bundles=basics,
        knife_cases=tuple(cases),
    )
    seq.validate(instance)
    return seq


def find_fully_labeled(instance: Instance, labeler: str = "ef2") -> SpernerSequence:
    """First fully-labeled elementary simplex in canonical order.

    Canonical order: lexicographic base vertex, then lexicographic step
    order, then lexicographic assignment of agents to chain vertices. The
    generalized Sperner lemma guarantees a hit; exhausting the triangulation
    without one is reported as a theorem violation.
    """
    _require_path(instance)
    n, m = instance.n, instance.m
    if m < n:
        raise PreconditionError("need at least as many items as agents")
    if labeler == "ef1_four" and n != 4:
        raise PreconditionError("the ef1_four labeler needs exactly four agents")
    fn = _resolve_labeler(instance, labeler)
    full = frozenset(range(n))
    top = 2 * m + 1

    cache = {}

    def info(h):
        got = cache.get(h)
        if got is None:
            labels = tuple(fn(agent, h) for agent in range(n))
            got = (labels, frozenset(labels))
            cache[h] = got
        return got

    grid = range(1, top + 1)
    for base in itertools.combinations_with_replacement(grid, n - 1):
        for pi in itertools.permutations(range(n - 1)):
            cur = list(base)
            chain = [base]
            ok = True
            for c in pi:
                cur[c] += 1
                if cur[c] > top or (c + 1 < n - 1 and cur[c] > cur[c + 1]):
                    ok = False
                    break
                chain.append(tuple(cur))
            if not ok:
                continue
            infos = [info(h) for h in chain]
            colors = frozenset().union(*(s for _, s in infos))
            if colors != full:
                continue
            for sigma in itertools.permutations(range(n)):
                phi = tuple(infos[sigma[i]][0][i] for i in range(n))
                if len(set(phi)) == n:
                    return _sequence_from_chain(instance, labeler, chain, sigma, phi)
    raise TheoremViolation(
        "no fully-labeled simplex exists; Sperner's lemma failed")


# ---------------------------------------------------------------------------
# Rounding


def round_ef2(seq: SpernerSequence, instance: Instance) -> Allocation:
    """Round a fully-labeled chain into a connected EF2 allocation: bundle j
    of the final partition is the union of the j-th bundles along the chain,
    and each agent takes the bundle of their own label."""
    n, m = seq.n, seq.instance_m
    unions = [frozenset().union(*(p.bundles[j] for p in seq.partitions))
              for j in range(n)]
    _check_complete(unions, m)
    bundles = [unions[seq.phi[i]] for i in range(n)]
    alloc = Allocation(tuple(bundles))
    alloc.validate(instance)
    return alloc


def _check_complete(unions, m: int) -> None:
    seen = set()
    for u in unions:
        if seen & u:
            raise TheoremViolation("rounded bundles overlap")
        seen |= u
    if seen != set(range(m)):
        raise TheoremViolation("rounded bundles do not cover all items")


def mirror_instance(instance: Instance) -> Instance:
    """The same instance with the path read right to left."""
    _require_path(instance)
    m = instance.m
    flipped = []
    for v in instance.valuations:
        if isinstance(v, AdditiveValuation):
            flipped.append(AdditiveValuation(tuple(reversed(v.item_values))))
        else:
            table = {(m - 1 - hi, m - 1 - lo): val
                     for (lo, hi), val in v.table.items()}
            flipped.append(IntervalTableValuation(m, table))
    return Instance(ItemGraph.path(m), tuple(flipped))


def _mirror_sequence(seq: SpernerSequence, mirrored: Instance) -> SpernerSequence:
    """Reverse the path and read the chain backwards; still fully labeled."""
    n, m = seq.n, seq.instance_m
    top = 2 * (m + 1)
    chain = []
    for x in reversed(seq.chain):
        h = x.half_units
        chain.append(tuple(top - h[n - 2 - c] for c in range(n - 1)))
    sigma = tuple(n - 1 - seq.sigma[i] for i in range(n))
    phi = tuple(n - 1 - seq.phi[i] for i in range(n))
    return _sequence_from_chain(mirrored, seq.labeler, chain, sigma, phi)


def _round_ef1_direct(seq: SpernerSequence, instance: Instance):
    """The four-agent rounding under the orientation assumption that the
    second boundary item shows up in the second bundle along the chain."""
    n, m = seq.n, seq.instance_m
    y = seq.boundary_items
    unions = [frozenset().union(*(p.bundles[j] for p in seq.partitions))
              for j in range(n)]
    bundles = [
        unions[0],
        unions[1],
        seq.basic_bundles[2] | {y[2]},
        seq.basic_bundles[3],
    ]
    _check_complete(bundles, m)
    _assert_sandwich(seq, instance, bundles)
    return bundles


def _assert_sandwich(seq: SpernerSequence, instance: Instance, bundles) -> None:
    graph = instance.graph
    for i in range(seq.n):
        x = seq.chain[seq.sigma[i]]
        for j in range(seq.n):
            expected = _virtual_h(instance, i, x.half_units, j)
            got = instance.valuations[i].value(bundles[j], graph)
            floor = up_to_one_value(instance.valuations[i], bundles[j], graph)
            if not got >= expected >= floor:
                raise TheoremViolation(
                    f"virtual-value sandwich failed for agent {i}, bundle {j}: "
                    f"{got} >= {expected} >= {floor}")


def round_ef1_four(seq: SpernerSequence, instance: Instance) -> Allocation:
    """Round a fully-labeled four-agent chain into a connected EF1 allocation.

    If the second boundary item never appears in the second bundle along the
    chain, the path is reversed first; the rounding is then mapped back.
    The virtual-value sandwich, which the EF1 guarantee rests on, is
    asserted for all sixteen agent/bundle pairs.
    """
    if seq.labeler != "ef1_four" or seq.n != 4:
        raise PreconditionError("round_ef1_four needs an ef1_four certificate")
    m = seq.instance_m
    y2 = seq.boundary_items[1]
    if any(y2 in p.bundles[1] for p in seq.partitions):
        bundles = _round_ef1_direct(seq, instance)
        alloc = Allocation(tuple(bundles[seq.phi[i]] for i in range(4)))
    else:
        mirrored = mirror_instance(instance)
        mseq = _mirror_sequence(seq, mirrored)
        my2 = mseq.boundary_items[1]
        if not any(my2 in p.bundles[1] for p in mseq.partitions):
            raise TheoremViolation(
                "boundary item missing from the second bundle in both orientations")
        mbundles = _round_ef1_direct(mseq, mirrored)
        back = [frozenset(m - 1 - t for t in b) for b in reversed(mbundles)]
        alloc = Allocation(tuple(back[seq.phi[i]] for i in range(4)))
    alloc.validate(instance)
    return alloc
