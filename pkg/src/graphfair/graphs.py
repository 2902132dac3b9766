"""Structural graph analysis: blocks, cut vertices, bipolar numberings.

For two agents, a connected graph admits a connected EF1 allocation for
every monotone valuation profile exactly when its block tree is a path,
equivalently when it has a bipolar numbering. This module computes the
block decomposition, decides the path condition, constructs a bipolar
numbering when one exists, and otherwise extracts a "trident" witness and
builds the binary valuation profile on which no connected two-agent
allocation is EF1.

All traversals are iterative so that graphs with 10^5+ vertices are fine.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    AdditiveValuation,
    Instance,
    ItemGraph,
    PreconditionError,
    TheoremViolation,
    ValidationError,
)


@dataclass(frozen=True)
class BlockTree:
    """Blocks (maximal biconnected subgraphs, as vertex sets) and cut vertices.

    The incidence structure between blocks and cut vertices forms a tree:
    block B is adjacent to cut vertex v iff v is in B.
    """

    blocks: tuple  # tuple[frozenset[int], ...]
    cut_vertices: frozenset

    def incidence(self) -> list:
        """(block index, cut vertex) adjacency pairs of the block tree."""
        return [(bi, v) for bi, block in enumerate(self.blocks)
                for v in sorted(self.cut_vertices & block)]

    def blocks_at(self, v: int) -> list:
        return [bi for bi, block in enumerate(self.blocks) if v in block]


def block_decomposition(graph: ItemGraph) -> BlockTree:
    """Blocks and cut vertices via depth-first search lowpoints.

    Requires a connected graph; disconnected inputs are an explicit error
    so the caller can handle components separately.
    """
    m = graph.m
    if not graph.is_connected():
        raise PreconditionError("block decomposition requires a connected graph")
    if m == 1:
        return BlockTree(blocks=(frozenset({0}),), cut_vertices=frozenset())

    adj = graph.neighbors
    disc = [-1] * m
    low = [0] * m
    parent = [-1] * m
    child_count = [0] * m
    is_cut = [False] * m
    edge_stack = []
    blocks = []
    timer = 0

    # iterative DFS; stack entries are (vertex, iterator index into adj[v])
    ptr = [0] * m
    stack = [0]
    disc[0] = low[0] = timer
    timer += 1
    while stack:
        v = stack[-1]
        if ptr[v] < len(adj[v]):
            w = adj[v][ptr[v]]
            ptr[v] += 1
            if disc[w] == -1:
                parent[w] = v
                child_count[v] += 1
                edge_stack.append((v, w))
                disc[w] = low[w] = timer
                timer += 1
                stack.append(w)
            elif w != parent[v] and disc[w] < disc[v]:
                edge_stack.append((v, w))
                low[v] = min(low[v], disc[w])
        else:
            stack.pop()
            if not stack:
                continue
            u = stack[-1]  # parent of v
            low[u] = min(low[u], low[v])
            if low[v] >= disc[u]:
                # u separates v's subtree: pop one block off the edge stack
                verts = set()
                while True:
                    a, b = edge_stack.pop()
                    verts.add(a)
                    verts.add(b)
                    if (a, b) == (u, v):
                        break
                blocks.append(frozenset(verts))
                if parent[u] != -1 or child_count[u] > 1:
                    is_cut[u] = True

    blocks.sort(key=lambda b: sorted(b))
    cuts = frozenset(v for v in range(m) if is_cut[v])
    return BlockTree(blocks=tuple(blocks), cut_vertices=cuts)


def block_tree_is_path(bt: BlockTree) -> bool:
    """True iff every node of the block/cut-vertex tree has degree <= 2."""
    for block in bt.blocks:
        if len(block & bt.cut_vertices) > 2:
            return False
    for v in bt.cut_vertices:
        if len(bt.blocks_at(v)) > 2:
            return False
    return True


@dataclass(frozen=True)
class Trident:
    """A degree-3 node of the block tree, the obstruction to two-agent EF1.

    kind 'a': a cut vertex incident to three blocks.
    kind 'b': a block containing three cut vertices; ``branches`` then holds
    (cut vertex, vertex set of a neighboring block through that cut vertex).
    """

    kind: str  # 'a' or 'b'
    center_cut: int = -1          # kind 'a'
    center_block: frozenset = frozenset()  # kind 'b'
    branches: tuple = ()          # kind 'a': 3 block vertex sets
                                  # kind 'b': 3 (cut vertex, block vertex set) pairs


def trident(bt: BlockTree) -> Trident:
    """Extract a trident from a block tree that is not a path."""
    if block_tree_is_path(bt):
        raise PreconditionError("block tree is a path; no trident exists")
    for v in sorted(bt.cut_vertices):
        incident = bt.blocks_at(v)
        if len(incident) >= 3:
            return Trident(kind="a", center_cut=v,
                           branches=tuple(bt.blocks[bi] for bi in incident[:3]))
    for bi, block in enumerate(bt.blocks):
        cuts = sorted(block & bt.cut_vertices)
        if len(cuts) >= 3:
            branches = []
            for s in cuts[:3]:
                other = next(oj for oj in bt.blocks_at(s) if oj != bi)
                branches.append((s, bt.blocks[other]))
            return Trident(kind="b", center_block=block, branches=tuple(branches))
    raise TheoremViolation("non-path block tree has no degree-3 node")


def _pick_branch_vertex(block: frozenset, exclude: int, cut_vertices: frozenset) -> int:
    """Lowest-id vertex of the block other than ``exclude``, preferring non-cut ones."""
    candidates = sorted(block - {exclude})
    non_cut = [v for v in candidates if v not in cut_vertices]
    return (non_cut or candidates)[0]


def no_ef1_counterexample(graph: ItemGraph) -> Instance:
    """Two identical binary additive agents with no connected EF1 allocation.

    Only defined for connected graphs whose block tree is not a path. Case
    'a' puts value 1 on the central cut vertex and on one vertex inside each
    of three incident blocks; case 'b' puts value 1 on three cut vertices of
    the central block and one vertex inside each neighboring block.
    """
    bt = block_decomposition(graph)
    if block_tree_is_path(bt):
        raise PreconditionError("graph guarantees EF1 for two agents; no counterexample")
    t = trident(bt)
    ones = set()
    if t.kind == "a":
        ones.add(t.center_cut)
        for block in t.branches:
            ones.add(_pick_branch_vertex(block, t.center_cut, bt.cut_vertices))
    else:
        for s, block in t.branches:
            ones.add(s)
            ones.add(_pick_branch_vertex(block, s, bt.cut_vertices))
    values = [1 if v in ones else 0 for v in range(graph.m)]
    valuation = AdditiveValuation(values)
    return Instance(graph, (valuation, AdditiveValuation(values)))


def disconnected_counterexample(graph: ItemGraph) -> Instance:
    """Two identical additive agents showing a disconnected graph never
    guarantees EF1: value 1 on one component with >= 2 vertices, 0 elsewhere."""
    comps = graph.connected_components()
    if len(comps) == 1:
        raise PreconditionError("graph is connected")
    big = [c for c in comps if len(c) >= 2]
    if not big:
        raise PreconditionError("all components are singletons")
    chosen = min(big, key=min)
    values = [1 if v in chosen else 0 for v in range(graph.m)]
    valuation = AdditiveValuation(values)
    return Instance(graph, (valuation, AdditiveValuation(values)))


@dataclass(frozen=True)
class VertexOrdering:
    """A vertex permutation; ``kind`` records which guarantee it carries."""

    order: tuple  # tuple[int, ...]
    kind: str     # 'hamiltonian_path' or 'bipolar'

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValidationError("ordering is not a permutation of the vertices")


def is_bipolar(graph: ItemGraph, order) -> bool:
    """Definitional check: every prefix and every suffix of the ordering,
    pivot included, induces a connected subgraph.

    Equivalent (and checked in linear time): every vertex except the first
    has an earlier neighbor and every vertex except the last has a later one.
    """
    order = list(order)
    if sorted(order) != list(range(graph.m)):
        return False
    pos = [0] * graph.m
    for i, v in enumerate(order):
        pos[v] = i
    for i, v in enumerate(order):
        if i > 0 and all(pos[w] > i for w in graph.neighbors[v]):
            return False
        if i < graph.m - 1 and all(pos[w] < i for w in graph.neighbors[v]):
            return False
    return True


def is_hamiltonian_path(graph: ItemGraph, order) -> bool:
    order = list(order)
    if sorted(order) != list(range(graph.m)):
        return False
    edge_set = graph.edges
    return all(
        (min(a, b), max(a, b)) in edge_set
        for a, b in zip(order, order[1:])
    )


def bipolar_numbering(graph: ItemGraph):
    """A bipolar numbering of the graph, or None when none exists.

    Exists iff the block tree is a path. Construction: pick a non-cut vertex
    s in one leaf block and t in the other, add the edge {s, t} (making the
    graph biconnected), and compute an st-numbering. The result is checked
    against the definitional invariant before being returned.
    """
    if not graph.is_connected():
        raise PreconditionError("bipolar numbering requires a connected graph")
    if graph.m == 1:
        return VertexOrdering(order=(0,), kind="bipolar")
    bt = block_decomposition(graph)
    if not block_tree_is_path(bt):
        return None
    s, t = _poles(bt)
    order = _st_numbering(graph, s, t)
    if not is_bipolar(graph, order):
        raise TheoremViolation(f"st-numbering failed the bipolar check: {order}")
    return VertexOrdering(order=tuple(order), kind="bipolar")


def _poles(bt: BlockTree):
    """Non-cut vertices in the two leaf blocks of a path-shaped block tree."""
    if len(bt.blocks) == 1:
        verts = sorted(bt.blocks[0])
        return verts[0], verts[1]
    leaves = [b for b in bt.blocks if len(b & bt.cut_vertices) <= 1]
    first, last = leaves[0], leaves[-1]
    s = min(first - bt.cut_vertices)
    t = min(last - bt.cut_vertices)
    return s, t


def _st_numbering(graph: ItemGraph, s: int, t: int) -> list:
    """st-numbering of graph + edge {s, t}, s first and t last.

    Classic two-phase algorithm: a DFS from s whose first edge goes to t
    records discovery times, parents and lowpoints; a pathfinder then peels
    ear-like paths of unused edges off a vertex stack, and vertices receive
    their number once they have no unused edge left. Linear time.
    """
    m = graph.m
    # adjacency with edge ids; the virtual edge {s,t} gets id 0 and t is
    # forced to be s's first DFS child
    edges = [(s, t)]
    for a, b in sorted(graph.edges):
        if (min(a, b), max(a, b)) != (min(s, t), max(s, t)):
            edges.append((a, b))
    adj = [[] for _ in range(m)]
    for eid, (a, b) in enumerate(edges):
        adj[a].append((b, eid))
        adj[b].append((a, eid))
    adj[s].sort(key=lambda x: x[1])  # edge 0 first

    disc = [-1] * m
    parent = [-1] * m
    parent_eid = [-1] * m
    low = [0] * m
    # how low[v] is realized: ('back', w, eid) or ('tree', child, eid)
    low_via = [None] * m

    timer = 0
    disc[s] = timer
    low[s] = 0
    timer += 1
    ptr = [0] * m
    dfs_stack = [s]
    while dfs_stack:
        v = dfs_stack[-1]
        if ptr[v] < len(adj[v]):
            w, eid = adj[v][ptr[v]]
            ptr[v] += 1
            if disc[w] == -1:
                parent[w] = v
                parent_eid[w] = eid
                disc[w] = timer
                low[w] = disc[w]
                timer += 1
                dfs_stack.append(w)
            elif eid != parent_eid[v] and disc[w] < disc[v]:
                if disc[w] < low[v]:
                    low[v] = disc[w]
                    low_via[v] = ("back", w, eid)
        else:
            dfs_stack.pop()
            if parent[v] != -1:
                u = parent[v]
                if low[v] < low[u]:
                    low[u] = low[v]
                    low_via[u] = ("tree", v, parent_eid[v])

    if any(d == -1 for d in disc):
        raise PreconditionError("graph is disconnected")

    old_vertex = [False] * m
    old_edge = [False] * len(edges)
    old_vertex[s] = old_vertex[t] = True
    old_edge[0] = True

    scan = [0] * m  # per-vertex pointer over adj, skipping old edges

    def next_new_edge(v):
        while scan[v] < len(adj[v]):
            w, eid = adj[v][scan[v]]
            if old_edge[eid]:
                scan[v] += 1
                continue
            return w, eid
        return None

    def find_path(v):
        """A path of new edges from v to an old vertex; [] if v has none."""
        hit = next_new_edge(v)
        if hit is None:
            return []
        w, eid = hit
        old_edge[eid] = True
        path = [v, w]
        if disc[w] < disc[v]:
            # back edge straight to an ancestor, which is already old
            return path
        if parent[w] == v and parent_eid[w] == eid:
            # tree edge: descend along lowpoint pointers, then one back edge up
            old_vertex[w] = True
            u = w
            while True:
                if low_via[u] is None:
                    raise TheoremViolation(
                        "lowpoint chain broke; input to st-numbering not biconnected")
                kind, x, low_eid = low_via[u]
                old_edge[low_eid] = True
                path.append(x)
                if kind == "back":
                    return path
                old_vertex[x] = True
                u = x
        # back edge arriving from a descendant: climb tree edges to an old vertex
        u = w
        while not old_vertex[u]:
            old_vertex[u] = True
            old_edge[parent_eid[u]] = True
            path.append(parent[u])
            u = parent[u]
        return path

    number = [0] * m
    nxt = 1
    work = [t, s]
    while work:
        v = work.pop()
        path = find_path(v)
        if not path:
            number[v] = nxt
            nxt += 1
        else:
            work.extend(path[-2::-1])  # intermediate vertices, then v back on top

    order = [0] * m
    for v in range(m):
        order[number[v] - 1] = v
    return order
