"""Generic pushdown reachability via ε-closure graphs.

A rooted pushdown system is given intensionally by an RPDSOracle:
`nop_delta(q)` enumerates push/no-change transitions (no stack needed) and
`top_delta(q, γ)` enumerates the pop transitions enabled when γ is on top.
`compact_naive` explores (state, stack) configurations breadth-first within
bounds and serves as a test oracle; `compact_worklist` computes the same
compacted system and ε-closure graph with the sprout/addPush/addPop/addEmpty
worklist algorithm, processing ΔH before ΔE before ΔS.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional


@dataclass(frozen=True)
class Push:
    frame: object


@dataclass(frozen=True)
class Pop:
    frame: object


class _Unch:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Unch"


UNCH = _Unch()


def net(actions):
    """Unique normal form: cancel adjacent Push(γ)·Pop(γ), drop Unch."""
    out = []
    for a in actions:
        if a is UNCH:
            continue
        if isinstance(a, Pop) and out and isinstance(out[-1], Push) \
                and out[-1].frame == a.frame:
            out.pop()
        else:
            out.append(a)
    return out


def stackify(actions):
    """The stack left by a push-only net form, top first; None otherwise."""
    n = net(actions)
    if any(isinstance(a, Pop) for a in n):
        return None
    return tuple(reversed([a.frame for a in n]))


@dataclass
class RPDSOracle:
    """Intensional rooted pushdown system.

    top_delta(q, γ) returns [(q', Pop(γ))...] — the pops enabled with γ on
    top; nop_delta(q) returns [(q', Push(γ') | UNCH)...].  Both must be
    repeatable, deterministic functions.
    """
    root: object
    top_delta: Callable
    nop_delta: Callable


class CRPDS:
    """Compacted rooted pushdown system: explicit nodes and edges."""

    def __init__(self, root):
        self.root = root
        self.nodes = {root: None}  # insertion-ordered set
        self.edges = {}  # (src, act, dst) -> None
        self._fwd = {}  # q -> {(act, q2): None}
        self._bwd = {}
        self._push_into = {}  # q2 -> {(src, frame): None}

    def add_node(self, q):
        if q in self.nodes:
            return False
        self.nodes[q] = None
        return True

    def has_edge(self, edge):
        return edge in self.edges

    def add_edge(self, edge):
        if edge in self.edges:
            return False
        s, act, d = edge
        self.edges[edge] = None
        self.add_node(s)
        self.add_node(d)
        self._fwd.setdefault(s, {})[(act, d)] = None
        self._bwd.setdefault(d, {})[(act, s)] = None
        if isinstance(act, Push):
            self._push_into.setdefault(d, {})[(s, act.frame)] = None
        return True

    def forward(self, q):
        return list(self._fwd.get(q, ()))

    def backward(self, q):
        return list(self._bwd.get(q, ()))

    def push_into(self, q):
        """All (src, frame) with an edge src --Push(frame)--> q."""
        return list(self._push_into.get(q, ()))


class ECG:
    """ε-closure graph: reflexive, transitive at fixpoint."""

    def __init__(self):
        self._fwd = {}
        self._bwd = {}
        self.pairs = {}

    def has(self, s, d):
        return (s, d) in self.pairs

    def add(self, s, d):
        if (s, d) in self.pairs:
            return False
        self.pairs[(s, d)] = None
        self._fwd.setdefault(s, {})[d] = None
        self._bwd.setdefault(d, {})[s] = None
        return True

    def fwd(self, q):
        return list(self._fwd.get(q, ()))

    def bwd(self, q):
        return list(self._bwd.get(q, ()))

    def descendants(self, q):
        """ε-reachable states including q itself."""
        out = {q: None}
        out.update(self._fwd.get(q, {}))
        return list(out)

    def ancestors(self, q):
        out = {q: None}
        out.update(self._bwd.get(q, {}))
        return list(out)


# ---------------------------------------------------------------------------
# worklist algorithm


def sprout(oracle, q):
    """Push/ε edges out of a newly discovered state."""
    d_edges, d_pairs = [], []
    for q2, act in oracle.nop_delta(q):
        assert not isinstance(act, Pop), "nop_delta must not pop"
        d_edges.append((q, act, q2))
        if act is UNCH:
            d_pairs.append((q, q2))
    return d_edges, d_pairs


def add_push(graph, ecg, oracle, edge):
    """Pops enabled at the ε-descendants of a new push edge's target."""
    s, act, q = edge
    gamma = act.frame
    d_edges, d_pairs = [], []
    for q1 in ecg.descendants(q):
        for q2, pact in oracle.top_delta(q1, gamma):
            if isinstance(pact, Pop) and pact.frame == gamma:
                d_edges.append((q1, pact, q2))
                d_pairs.append((s, q2))
    return d_edges, d_pairs


def add_pop(graph, ecg, oracle, edge):
    """ε pairs closed by a new pop edge through upstream matching pushes."""
    s2, act, q = edge
    gamma = act.frame
    d_pairs = []
    for s1 in ecg.ancestors(s2):
        for src, frame in graph.push_into(s1):
            if frame == gamma:
                d_pairs.append((src, q))
    return [], d_pairs


def add_empty(graph, ecg, oracle, pair):
    """Transitive ε pairs and pops newly enabled across an ε bridge."""
    s2, s3 = pair
    d_edges, d_pairs = [], []
    anc = ecg.ancestors(s2)
    desc = ecg.descendants(s3)
    for s1 in anc:
        for src, gamma in graph.push_into(s1):
            for s4 in desc:
                for q, pact in oracle.top_delta(s4, gamma):
                    if isinstance(pact, Pop) and pact.frame == gamma:
                        d_edges.append((s4, pact, q))
                        d_pairs.append((src, q))
    for s1 in anc:
        for s4 in desc:
            d_pairs.append((s1, s4))
    return d_edges, d_pairs


def compact_worklist(oracle, deadline: Optional[float] = None,
                     node_limit: Optional[int] = None):
    """Fixed point of the ε-closure-graph worklist; ΔH before ΔE before ΔS.

    Returns (CRPDS, ECG, saturated); saturated is False only when a limit
    aborted the loop.
    """
    root = oracle.root
    graph = CRPDS(root)
    ecg = ECG()
    dS, dE, dH = deque(), deque(), deque()
    queued_e, queued_h = set(), set()
    seen = set()
    saturated = True

    def enq_state(q):
        if q not in seen:
            seen.add(q)
            graph.add_node(q)
            dS.append(q)
            enq_pair((q, q))  # ε-closure graphs are reflexive

    def enq_edge(e):
        if e not in queued_e and not graph.has_edge(e):
            queued_e.add(e)
            dE.append(e)

    def enq_pair(p):
        if p not in queued_h and not ecg.has(*p):
            queued_h.add(p)
            dH.append(p)

    def enq_deltas(d_edges, d_pairs):
        for p in d_pairs:
            enq_pair(p)
        for e in d_edges:
            enq_edge(e)

    enq_state(root)
    ticks = 0
    while dH or dE or dS:
        ticks += 1
        if ticks % 256 == 0:
            if deadline is not None and time.monotonic() > deadline:
                saturated = False
                break
            if node_limit is not None and len(graph.nodes) > node_limit:
                saturated = False
                break
        if dH:
            p = dH.popleft()
            queued_h.discard(p)
            d_edges, d_pairs = add_empty(graph, ecg, oracle, p)
            added = ecg.add(*p)
            assert added, f"duplicate ε pair {p}"
            enq_deltas(d_edges, d_pairs)
        elif dE:
            e = dE.popleft()
            queued_e.discard(e)
            s, act, d = e
            if act is UNCH:
                enq_pair((s, d))
            elif isinstance(act, Push):
                d_edges, d_pairs = add_push(graph, ecg, oracle, e)
                enq_deltas(d_edges, d_pairs)
            else:
                d_edges, d_pairs = add_pop(graph, ecg, oracle, e)
                enq_deltas(d_edges, d_pairs)
            added = graph.add_edge(e)
            assert added, f"duplicate edge {e}"
            enq_state(d)
        else:
            q = dS.popleft()
            d_edges, d_pairs = sprout(oracle, q)
            enq_deltas(d_edges, d_pairs)
    return graph, ecg, saturated


# ---------------------------------------------------------------------------
# bounded configuration-space search (test oracle only)


def compact_naive(oracle, depth_bound: int, step_bound: int):
    """Explicit (state, stack) BFS from (root, ⟨⟩).

    Records traversed edges and all balanced (equal entry/exit stack) pairs.
    saturated=True only if no frontier was truncated and the step budget was
    not exhausted — in that case the result is exact.
    """
    root = oracle.root
    graph = CRPDS(root)
    ecg = ECG()
    saturated = True
    steps = 0

    def transitions(q, stack):
        out = list(oracle.nop_delta(q))
        if stack:
            for q2, act in oracle.top_delta(q, stack[0]):
                if isinstance(act, Pop) and act.frame == stack[0]:
                    out.append((q2, act))
        return out

    # main reachability BFS
    visited = {(root, ())}
    queue = deque(visited)
    while queue:
        steps += 1
        if steps > step_bound:
            saturated = False
            break
        q, stack = queue.popleft()
        for q2, act in transitions(q, stack):
            if isinstance(act, Push):
                if len(stack) >= depth_bound:
                    saturated = False
                    continue
                stack2 = (act.frame,) + stack
            elif isinstance(act, Pop):
                stack2 = stack[1:]
            else:
                stack2 = stack
            graph.add_edge((q, act, q2))
            if (q2, stack2) not in visited:
                visited.add((q2, stack2))
                queue.append((q2, stack2))

    # balanced pairs: from each reachable state, explore never-below paths
    for s in list(graph.nodes):
        sub_seen = {(s, ())}
        sub_q = deque(sub_seen)
        while sub_q:
            steps += 1
            if steps > step_bound:
                saturated = False
                break
            q, rel = sub_q.popleft()
            if not rel:
                ecg.add(s, q)
            for q2, act in transitions(q, rel):
                if isinstance(act, Push):
                    if len(rel) >= depth_bound:
                        saturated = False
                        continue
                    rel2 = (act.frame,) + rel
                elif isinstance(act, Pop):
                    rel2 = rel[1:]
                else:
                    rel2 = rel
                if (q2, rel2) not in sub_seen:
                    sub_seen.add((q2, rel2))
                    sub_q.append((q2, rel2))
    return graph, ecg, saturated
