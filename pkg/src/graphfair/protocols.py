"""Constructive allocation protocols over vertex sequences.

Implements the discrete cut-and-choose protocol for two agents, the
median-lumpy-tie machinery and discrete moving-knife protocol for three
agents, and the leximin-based reallocation procedure for identical
valuations on a path. Every protocol returns a connected EF1 allocation.

Positions vs items: protocols run over an ordered vertex sequence; all
internal indices are 0-based positions into that sequence, and bundles are
translated back to item ids at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    AdditiveValuation,
    Allocation,
    Instance,
    IntervalTableValuation,
    PreconditionError,
    TheoremViolation,
)
from .graphs import VertexOrdering, is_bipolar


class SequenceView:
    """Constant-time values of contiguous runs of a fixed vertex ordering.

    Additive valuations work over any ordering via prefix sums; interval
    tables require the identity ordering so runs coincide with intervals.
    ``queries`` counts how many nonempty runs the owner has been asked about.
    """

    def __init__(self, valuation, order):
        self.order = tuple(order)
        self.queries = 0
        m = len(self.order)
        if isinstance(valuation, AdditiveValuation):
            prefix = [0]
            for v in self.order:
                prefix.append(prefix[-1] + valuation.item_values[v])
            self._prefix = prefix
            self._lookup = None
        elif isinstance(valuation, IntervalTableValuation):
            if list(self.order) != list(range(m)) or m != valuation.m:
                raise PreconditionError(
                    "interval-table valuations only support the identity ordering")
            self._prefix = None
            self._lookup = valuation.table
        else:
            raise PreconditionError(f"unsupported valuation type {type(valuation)!r}")

    def value(self, lo: int, hi: int):
        """Value of positions lo..hi inclusive; empty runs are worth 0."""
        if lo > hi:
            return 0
        self.queries += 1
        if self._prefix is not None:
            return self._prefix[hi + 1] - self._prefix[lo]
        return self._lookup[(lo, hi)]

    def up_to_one(self, lo: int, hi: int):
        """Run value after dropping the cheaper endpoint; 0 for runs of size <= 1."""
        if lo >= hi:
            return 0
        return min(self.value(lo + 1, hi), self.value(lo, hi - 1))


def _lumpy_tie_scan(view: SequenceView, start: int, end: int) -> int:
    """Smallest position j in [start, end] whose prefix (including j) is worth
    at least the rest; such a j always exists and it also satisfies the
    symmetric inequality, making it the lumpy tie of the subsequence."""
    for j in range(start, end + 1):
        if view.value(start, j) >= view.value(j + 1, end):
            return j
    raise TheoremViolation("no lumpy tie found; valuation is not monotone")


def lumpy_tie(valuation, seq) -> int:
    """Position (0-based) of the valuation's lumpy tie over the sequence.

    The lumpy tie is the first pivot at which the pieces on either side are
    equal in value up to one item: both side-plus-pivot bundles weakly beat
    the opposite side.

    >>> lumpy_tie(AdditiveValuation([1, 3, 2, 1, 3, 1]), range(6))
    2
    """
    seq = list(seq)
    if not seq:
        raise PreconditionError("lumpy tie of an empty sequence")
    view = SequenceView(valuation, seq)
    j = _lumpy_tie_scan(view, 0, len(seq) - 1)
    assert view.value(0, j) >= view.value(j + 1, len(seq) - 1)
    assert view.value(j, len(seq) - 1) >= view.value(0, j - 1)
    return j


def _resolve_order(instance: Instance, ordering) -> tuple:
    if ordering is None:
        if not instance.graph.path_flag:
            raise PreconditionError("a vertex ordering is required off a path")
        return tuple(range(instance.m))
    if isinstance(ordering, VertexOrdering):
        ordering = ordering.order
    order = tuple(ordering)
    if sorted(order) != list(range(instance.m)):
        raise PreconditionError("ordering is not a permutation of the items")
    return order


def cut_and_choose(instance: Instance, ordering=None, trace=None) -> Allocation:
    """Discrete cut-and-choose for two agents over a bipolar ordering.

    Alice (agent 0) marks her lumpy tie; Bob (agent 1) takes his weakly
    preferred side (ties go left), and Alice keeps the rest including the
    tie item. The result is a connected EF1 allocation.
    """
    if instance.n != 2:
        raise PreconditionError("cut-and-choose needs exactly two agents")
    order = _resolve_order(instance, ordering)
    if not is_bipolar(instance.graph, order):
        raise PreconditionError("ordering is not bipolar for this graph")
    m = instance.m
    alice = SequenceView(instance.valuations[0], order)
    bob = SequenceView(instance.valuations[1], order)
    j = _lumpy_tie_scan(alice, 0, m - 1)
    if trace is not None:
        trace.append({"event": "lumpy_tie", "agent": 0, "position": j,
                      "item": order[j]})
    left = bob.value(0, j - 1)
    right = bob.value(j + 1, m - 1)
    if left >= right:
        bob_lo, bob_hi = 0, j - 1
        alice_lo, alice_hi = j, m - 1
    else:
        bob_lo, bob_hi = j + 1, m - 1
        alice_lo, alice_hi = 0, j
    if trace is not None:
        trace.append({"event": "choose", "agent": 1,
                      "side": "left" if left >= right else "right"})
    return Allocation((
        frozenset(order[alice_lo:alice_hi + 1]),
        frozenset(order[bob_lo:bob_hi + 1]),
    ))


def median_lumpy_tie(instance: Instance, seq):
    """Median of the three agents' lumpy ties over the sequence, plus each
    agent's classification as 'left', 'middle' or 'right' of the median."""
    if instance.n != 3:
        raise PreconditionError("median lumpy tie is defined for three agents")
    seq = list(seq)
    if not seq:
        raise PreconditionError("empty sequence")
    ties = [lumpy_tie(v, seq) for v in instance.valuations]
    median = sorted(ties)[1]
    labels = tuple(
        "left" if t < median else "right" if t > median else "middle"
        for t in ties
    )
    return median, labels


def _lumpy_split(views, ties, agents, median_pos, sub_start, last):
    """The two-agent split around a median lumpy tie.

    ``agents`` are the two recipients; ties are their lumpy-tie positions
    over positions [sub_start, last]. Returns {agent: (lo, hi)} position
    ranges covering [sub_start, last] with the median item going to a middle
    agent or to the right agent.
    """
    i, k = agents
    cls = {}
    for a in (i, k):
        t = ties[a]
        cls[a] = "left" if t < median_pos else "right" if t > median_pos else "middle"
    if cls[i] == "middle" or cls[k] == "middle":
        mid = i if cls[i] == "middle" else k
        other = k if mid == i else i
        left_val = views[other].value(sub_start, median_pos - 1)
        right_val = views[other].value(median_pos + 1, last)
        if left_val >= right_val:
            return {other: (sub_start, median_pos - 1), mid: (median_pos, last)}
        return {other: (median_pos + 1, last), mid: (sub_start, median_pos)}
    if cls[i] == "left" and cls[k] == "right":
        return {i: (sub_start, median_pos - 1), k: (median_pos, last)}
    if cls[k] == "left" and cls[i] == "right":
        return {k: (sub_start, median_pos - 1), i: (median_pos, last)}
    raise TheoremViolation(
        f"median lumpy tie misclassified the pair: {cls}")


def lumpy_allocation(instance: Instance, agents, median_pos, seq):
    """Allocate the items of ``seq`` to the two ``agents`` around the median
    lumpy tie at position ``median_pos`` (a position into ``seq``).

    Each recipient ends up weakly preferring their bundle to both sides of
    the tie, and the split is EF1 between the two of them.
    """
    if len(agents) != 2:
        raise PreconditionError("lumpy allocation splits between exactly two agents")
    seq = list(seq)
    if instance.n == 3:
        all_ties = sorted(lumpy_tie(v, seq) for v in instance.valuations)
        if all_ties[1] != median_pos:
            raise PreconditionError(
                f"position {median_pos} is not the median lumpy tie (ties {all_ties})")
    views = {a: SequenceView(instance.valuations[a], seq) for a in agents}
    ties = {a: _lumpy_tie_scan(views[a], 0, len(seq) - 1) for a in agents}
    split = _lumpy_split(views, ties, tuple(agents), median_pos, 0, len(seq) - 1)
    return {a: frozenset(seq[lo:hi + 1]) for a, (lo, hi) in split.items()}


@dataclass(frozen=True)
class MovingKnifeState:
    """Snapshot of the moving-knife bundles, in item positions."""

    phase: str
    ell: int          # number of items in L
    r: int            # position of the covered right item
    L: tuple
    M: tuple
    R: tuple


def moving_knife(instance: Instance, ordering=None, trace=None, stats=None) -> Allocation:
    """Discrete moving-knife protocol for three agents on a traceable graph.

    A left pointer grows the bundle L one item at a time while a covered
    item at the median lumpy tie splits the remainder into M and R; agents
    shout when L becomes weakly best. A single shouter takes L and the rest
    is split around the median tie; with two shouters the non-shouter picks
    between the middle and right bundles. Runs with O(m) valuation queries.
    """
    if instance.n != 3:
        raise PreconditionError("moving knife needs exactly three agents")
    order = _resolve_order(instance, ordering)
    if ordering is not None and not _is_ham_path(instance, order):
        raise PreconditionError("ordering is not a Hamiltonian path of the graph")
    m = instance.m
    views = [SequenceView(v, order) for v in instance.valuations]

    def finish(assignment):
        bundles = [frozenset()] * 3
        for agent, (lo, hi) in assignment.items():
            bundles[agent] = frozenset(order[lo:hi + 1]) if lo <= hi else frozenset()
        if stats is not None:
            stats["valuation_queries"] = sum(v.queries for v in views)
        return Allocation(tuple(bundles))

    if m == 1:
        return finish({0: (0, 0), 1: (1, 0), 2: (1, 0)})

    # lumpy-tie pointers over the live suffix; they only ever move right
    sub_start = 1
    ties = [_lumpy_tie_scan(views[i], sub_start, m - 1) for i in range(3)]

    def advance_ties(new_start):
        nonlocal sub_start
        sub_start = new_start
        for i in range(3):
            if ties[i] < sub_start:
                ties[i] = sub_start
            while views[i].value(sub_start, ties[i]) < views[i].value(ties[i] + 1, m - 1):
                ties[i] += 1

    def median():
        return sorted(ties)[1]

    ell = 0
    r = median()
    m_lo = 1  # first position of M

    def shouters():
        out = []
        for i in range(3):
            left = views[i].value(0, ell - 1)
            if left >= views[i].value(m_lo, r - 1) and left >= views[i].value(r + 1, m - 1):
                out.append(i)
        return out

    def snap(phase):
        if trace is not None:
            trace.append({"event": "state", "state": MovingKnifeState(
                phase=phase, ell=ell, r=r,
                L=tuple(order[k] for k in range(0, ell)),
                M=tuple(order[k] for k in range(m_lo, r)),
                R=tuple(order[k] for k in range(r + 1, m)))})

    def split_rest(excluded, start):
        pair = tuple(a for a in range(3) if a != excluded)
        if median() != r:
            raise TheoremViolation("covered item is not the median lumpy tie")
        return _lumpy_split(views, ties, pair, r, start, m - 1)

    snap("step1")
    prev_shouters: list = []
    for _ in range(4 * m + 8):
        # Step 2: grow L by one item
        ell += 1
        m_lo = ell
        snap("step2")
        shout = shouters()
        if shout:
            s_left = shout[0]
            if trace is not None:
                trace.append({"event": "shout", "phase": "step2", "agents": shout})
            assignment = split_rest(s_left, ell)
            assignment[s_left] = (0, ell - 1)
            return finish(assignment)

        # Step 3: the knife covers the item right of L
        m_lo = ell + 1
        snap("step3")
        shout = shouters()
        if len(shout) >= 2:
            if trace is not None:
                trace.append({"event": "shout", "phase": "step3", "agents": shout})
            mids = [a for a in shout if ties[a] == r]
            if not mids:
                raise TheoremViolation("no shouting middle agent in step 3")
            s = mids[0]
            s_left = next(a for a in shout if a != s)
            c = next(a for a in range(3) if a not in (s, s_left))
            mid_val = views[c].value(ell, r - 1)
            right_val = views[c].value(r, m - 1)
            if mid_val >= right_val:
                assignment = {c: (ell, r - 1), s: (r, m - 1)}
            else:
                assignment = {c: (r, m - 1), s: (ell, r - 1)}
            assignment[s_left] = (0, ell - 1)
            return finish(assignment)
        prev_shouters = shout

        # Step 4: catch the right pointer up to the median lumpy tie,
        # re-evaluating the termination cases after each single move
        advance_ties(ell + 1)
        while True:
            if r != median():
                r += 1
                snap("step4_move")
            shout = shouters()
            if len(shout) >= 2:
                if trace is not None:
                    trace.append({"event": "shout", "phase": "step4a", "agents": shout})
                fresh = [a for a in shout if a not in prev_shouters]
                if not fresh:
                    raise TheoremViolation("no fresh shouter in step 4(a)")
                s = fresh[0]
                held = [a for a in shout if a in prev_shouters]
                s_left = held[0] if held else next(a for a in shout if a != s)
                c = next(a for a in range(3) if a not in (s, s_left))
                mid_val = views[c].value(ell, r - 1)
                right_val = views[c].value(r, m - 1)
                if mid_val >= right_val:
                    assignment = {c: (ell, r - 1), s: (r, m - 1)}
                else:
                    assignment = {c: (r, m - 1), s: (ell, r - 1)}
                assignment[s_left] = (0, ell - 1)
                return finish(assignment)
            if r == median():
                if len(shout) == 1:
                    s_left = shout[0]
                    if trace is not None:
                        trace.append({"event": "shout", "phase": "step4b",
                                      "agents": shout})
                    assignment = split_rest(s_left, ell + 1)
                    assignment[s_left] = (0, ell)
                    return finish(assignment)
                break  # 4(c): nobody shouts, resume growing L
            prev_shouters = shout  # 4(d): repeat step 4

    raise TheoremViolation("moving-knife protocol failed to terminate")


def _is_ham_path(instance: Instance, order) -> bool:
    edges = instance.graph.edges
    return all((min(a, b), max(a, b)) in edges for a, b in zip(order, order[1:]))


# ---------------------------------------------------------------------------
# Identical valuations on a path: leximin and its EF1 repair


def _require_identical_path(instance: Instance):
    if not instance.graph.path_flag:
        raise PreconditionError("leximin procedures require a path instance")
    if not instance.has_identical_valuations():
        raise PreconditionError("leximin procedures require identical valuations")
    return instance.valuations[0]


def leximin_allocation(instance: Instance) -> Allocation:
    """A connected allocation maximizing the minimum bundle value and, among
    those, minimizing the number of bundles at that minimum.

    Two dynamic programs over (bundle count, prefix length) states; agent j
    receives the j-th interval from the left. Empty bundles are allowed and
    show up only when the optimal minimum is zero.
    """
    u = _require_identical_path(instance)
    n, m = instance.n, instance.m

    def val(j, i):
        """Value of items j..i-1 (empty when j == i)."""
        return u.interval_value(j, i - 1)

    f = [[None] * (m + 1) for _ in range(n + 1)]
    for i in range(m + 1):
        f[1][i] = val(0, i)
    for k in range(2, n + 1):
        for i in range(m + 1):
            f[k][i] = max(min(f[k - 1][j], val(j, i)) for j in range(i + 1))
    target = f[n][m]

    INF = float("inf")
    g = [[INF] * (m + 1) for _ in range(n + 1)]
    for i in range(m + 1):
        v = val(0, i)
        if v >= target:
            g[1][i] = 1 if v == target else 0
    for k in range(2, n + 1):
        for i in range(m + 1):
            best = INF
            for j in range(i + 1):
                v = val(j, i)
                if v < target or g[k - 1][j] == INF:
                    continue
                cand = g[k - 1][j] + (1 if v == target else 0)
                if cand < best:
                    best = cand
            g[k][i] = best

    # backtrack, preferring the leftmost feasible split at every level
    bounds = [None] * n
    i = m
    for k in range(n, 1, -1):
        for j in range(i + 1):
            v = val(j, i)
            if v < target or g[k - 1][j] == INF:
                continue
            if g[k - 1][j] + (1 if v == target else 0) == g[k][i]:
                bounds[k - 1] = (j, i - 1)
                i = j
                break
        else:
            raise TheoremViolation("leximin backtracking lost the optimum")
    bounds[0] = (0, i - 1)

    return Allocation(tuple(
        frozenset(range(lo, hi + 1)) for lo, hi in bounds
    ))


def leximin_to_ef1(instance: Instance, trace=None) -> Allocation:
    """Repair a leximin allocation into an EF1 one by moving boundary items
    of envied bundles toward a fixed worst-off agent.

    The worst-off agent's utility, the optimal minimum, and the loser set
    are all preserved by every move; this is asserted after each step.
    """
    u = _require_identical_path(instance)
    n = instance.n
    start = leximin_allocation(instance)
    bundles = [sorted(b) for b in start.bundles]

    def bval(b):
        return u.interval_value(b[0], b[-1]) if b else 0

    def bminus(b):
        if len(b) <= 1:
            return 0
        return min(u.interval_value(b[1], b[-1]), u.interval_value(b[0], b[-2]))

    utilities = [bval(b) for b in bundles]
    u_low = min(utilities)
    losers = frozenset(j for j, x in enumerate(utilities) if x == u_low)
    agent = min(losers)

    def check_invariants():
        now = [bval(b) for b in bundles]
        if min(now) != u_low:
            raise TheoremViolation("minimum utility drifted during the repair")
        if frozenset(j for j, x in enumerate(now) if x == u_low) != losers:
            raise TheoremViolation("loser set changed during the repair")

    def move(src, dst, take_right):
        item = bundles[src].pop(-1 if take_right else 0)
        if take_right:
            bundles[dst].insert(0, item)
        else:
            bundles[dst].append(item)
        if trace is not None:
            trace.append({"event": "move_item", "item": item,
                          "from": src, "to": dst})
        check_invariants()

    for j in range(agent):
        while bval(bundles[agent]) < bminus(bundles[j]):
            move(j, j + 1, take_right=True)
    for j in range(n - 1, agent, -1):
        while bval(bundles[agent]) < bminus(bundles[j]):
            move(j, j - 1, take_right=False)

    return Allocation(tuple(frozenset(b) for b in bundles))
