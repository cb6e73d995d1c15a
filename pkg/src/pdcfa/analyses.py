"""End-to-end analysis drivers.

Six analyses over one normalized program:

- analyze_pdcfa:          per-state-store pushdown reachability
- analyze_gc_precise:     pushdown + abstract GC, root sets carried on nodes
- analyze_gc_approx:      pushdown + abstract GC with a per-node root cache
- analyze_pdcfa_widened:  single-threaded (widened) store, partial states
- analyze_finite:         store-allocated continuations (plain k-CFA baseline),
                          with or without GC

All reuse the abstract stepper; the pushdown ones embed it into an
RPDSOracle by running astep with an empty stack (push/ε transitions) or a
singleton stack (pop transitions).
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .syntax import Exp, Let1
from .abstract import (AConf, AEnv, AStore, AFrame, EMPTY_ENV, EMPTY_STORE,
                       FState, K_HALT, astep, astep_finite, finject, skey,
                       store_join, _intern, KAddr)
from .gc import gc_store, touches
from .pushdown import (Push, Pop, UNCH, RPDSOracle, CRPDS, ECG,
                       compact_worklist)


@dataclass(frozen=True, eq=False)
class ControlState:
    exp: Exp
    env: AEnv
    store: AStore
    ctx: tuple = ()

    @classmethod
    def make(cls, exp, env, store, ctx=()):
        return _intern(cls, (id(exp), env, store, ctx), exp, env, store, ctx)

    def skey(self):
        return (self.exp.label, self.env.skey(), self.store.skey(), self.ctx)

    def __repr__(self):
        return f"q(e{self.exp.label})"


@dataclass(frozen=True, eq=False)
class PState:
    exp: Exp
    env: AEnv
    ctx: tuple = ()

    @classmethod
    def make(cls, exp, env, ctx=()):
        return _intern(cls, (id(exp), env, ctx), exp, env, ctx)

    def skey(self):
        return (self.exp.label, self.env.skey(), self.ctx)

    def __repr__(self):
        return f"ψ(e{self.exp.label})"


def _roots_key(roots):
    return tuple(sorted(a.skey() for a in roots))


@dataclass(frozen=True, eq=False)
class OPState:
    state: ControlState
    roots: frozenset

    @classmethod
    def make(cls, state, roots):
        return _intern(cls, (state, roots), state, roots)

    def skey(self):
        return (self.state.skey(), _roots_key(self.roots))

    def __repr__(self):
        return f"Ω(e{self.state.exp.label},|A|={len(self.roots)})"


def act_skey(act):
    if act is UNCH:
        return (0,)
    frame = act.frame
    if isinstance(frame, tuple):  # GC-precise stack character (frame, roots)
        fk = (frame[0].skey(), _roots_key(frame[1]))
    elif isinstance(frame, str):
        fk = (frame,)
    else:
        fk = frame.skey()
    return ((1,) if isinstance(act, Push) else (2,)) + fk


@dataclass
class AnalysisResult:
    kind: str
    policy: object
    gc_mode: bool
    graph: CRPDS
    ecg: Optional[ECG]
    exp: Exp
    saturated: bool = True
    global_store: Optional[AStore] = None
    root_cache: Optional[dict] = None
    guarded_edges: Optional[list] = None
    kstore: Optional[dict] = None
    extras: dict = field(default_factory=dict)

    @property
    def nodes(self):
        return list(self.graph.nodes)

    @property
    def edges(self):
        return list(self.graph.edges)

    def stores(self):
        """Every abstract store the analysis reached (for precision metrics)."""
        if self.kind == "pdcfa-widened":
            return [self.global_store]
        out = []
        for n in self.graph.nodes:
            if isinstance(n, OPState):
                out.append(n.state.store)
            else:
                out.append(n.store)
        return out


# ---------------------------------------------------------------------------
# per-state-store pushdown analysis


def _cs_of(c: AConf) -> ControlState:
    return ControlState.make(c.exp, c.env, c.store, c.ctx)


def analyze_pdcfa(e: Exp, policy, deadline=None, node_limit=None) -> AnalysisResult:
    root = ControlState.make(e, EMPTY_ENV, EMPTY_STORE, ())

    def nop_delta(q):
        c = AConf.make(q.exp, q.env, q.store, (), q.ctx)
        out = []
        for c2 in astep(c, policy):
            if c2.kont:
                out.append((_cs_of(c2), Push(c2.kont[0])))
            else:
                out.append((_cs_of(c2), UNCH))
        return out

    def top_delta(q, gamma):
        c = AConf.make(q.exp, q.env, q.store, (gamma,), q.ctx)
        out = []
        for c2 in astep(c, policy):
            if not c2.kont:
                out.append((_cs_of(c2), Pop(gamma)))
        return out

    oracle = RPDSOracle(root, top_delta, nop_delta)
    graph, ecg, sat = compact_worklist(oracle, deadline, node_limit)
    return AnalysisResult("pdcfa", policy, False, graph, ecg, e, sat)


# ---------------------------------------------------------------------------
# precise GC pushdown analysis


def analyze_gc_precise(e: Exp, policy, deadline=None, node_limit=None) -> AnalysisResult:
    """Pushdown + GC: nodes carry the stack-root set A; push edges extend A
    by the pushed frame's touches; the popped stack character carries the
    pusher's root set so pops restore it."""
    root = OPState.make(ControlState.make(e, EMPTY_ENV, EMPTY_STORE, ()),
                        frozenset())

    def _collected(om: OPState):
        q = om.state
        return gc_store(q.env, q.store, om.roots)

    def nop_delta(om):
        q = om.state
        c = AConf.make(q.exp, q.env, _collected(om), (), q.ctx)
        out = []
        for c2 in astep(c, policy):
            if c2.kont:
                fr = c2.kont[0]
                tgt = OPState.make(_cs_of(c2), om.roots | touches(fr))
                out.append((tgt, Push((fr, om.roots))))
            else:
                out.append((OPState.make(_cs_of(c2), om.roots), UNCH))
        return out

    def top_delta(om, gamma):
        fr, below = gamma
        q = om.state
        c = AConf.make(q.exp, q.env, _collected(om), (fr,), q.ctx)
        out = []
        for c2 in astep(c, policy):
            if not c2.kont:
                out.append((OPState.make(_cs_of(c2), below), Pop(gamma)))
        return out

    oracle = RPDSOracle(root, top_delta, nop_delta)
    graph, ecg, sat = compact_worklist(oracle, deadline, node_limit)
    return AnalysisResult("pdcfa-gc", policy, True, graph, ecg, e, sat)


# ---------------------------------------------------------------------------
# store-widened pushdown analysis


def _ps_of(c: AConf) -> PState:
    return PState.make(c.exp, c.env, c.ctx)


def analyze_pdcfa_widened(e: Exp, policy, deadline=None) -> AnalysisResult:
    """Iterate the widened transfer function to its least fixed point:
    a single global store, partial (exp, env) states, and an ε-closure
    graph whose bridges enable pops against recorded pushes."""
    root = PState.make(e, EMPTY_ENV, ())
    graph = CRPDS(root)
    ecg = ECG()
    ecg.add(root, root)
    store = EMPTY_STORE
    saturated = True
    changed = True
    while changed:
        if deadline is not None and time.monotonic() > deadline:
            saturated = False
            break
        changed = False
        stores = [store]
        new_edges = []
        new_pairs = []
        for psi in list(graph.nodes):
            c = AConf.make(psi.exp, psi.env, store, (), psi.ctx)
            for c2 in astep(c, policy):
                stores.append(c2.store)
                if c2.kont:
                    new_edges.append((psi, Push(c2.kont[0]), _ps_of(c2)))
                else:
                    tgt = _ps_of(c2)
                    new_edges.append((psi, UNCH, tgt))
                    new_pairs.append((psi, tgt))
        for edge in new_edges:
            changed |= graph.add_edge(edge)
        # pops: a frame pushed into a node's ε-class may be popped there
        for (src, act, dst) in list(graph.edges):
            if not isinstance(act, Push):
                continue
            fr = act.frame
            for psi2 in ecg.descendants(dst):
                c = AConf.make(psi2.exp, psi2.env, store, (fr,), psi2.ctx)
                for c2 in astep(c, policy):
                    if c2.kont:
                        continue
                    stores.append(c2.store)
                    tgt = _ps_of(c2)
                    changed |= graph.add_edge((psi2, Pop(fr), tgt))
                    new_pairs.append((src, tgt))
        for psi in list(graph.nodes):
            new_pairs.append((psi, psi))
        for p in new_pairs:
            changed |= ecg.add(*p)
        # transitive closure of the ε summary
        closing = True
        while closing:
            closing = False
            for (a, b) in list(ecg.pairs):
                for c3 in ecg.fwd(b):
                    if ecg.add(a, c3):
                        closing = True
                        changed = True
        merged = store
        for s in stores:
            merged = store_join(merged, s)
        if merged is not store:
            store = merged
            changed = True
    return AnalysisResult("pdcfa-widened", policy, False, graph, ecg, e,
                          saturated, global_store=store)


# ---------------------------------------------------------------------------
# approximate GC pushdown analysis (per-node root cache)


def compute_root_cache(nodes, guarded_edges, hpairs) -> dict:
    """From-scratch least fixed point of the root-transfer equations:
    R(ψ) = ⋃ {touches(φ) ∪ R(ψ′) : ψ′ --φ+--> ψ} ∪ {R(ψ′) : (ψ′,ψ) ∈ H}."""
    R = {n: frozenset() for n in nodes}
    for (src, _g, act, dst) in guarded_edges:
        R.setdefault(src, frozenset())
        R.setdefault(dst, frozenset())
    for (a, b) in hpairs:
        R.setdefault(a, frozenset())
        R.setdefault(b, frozenset())
    changed = True
    while changed:
        changed = False
        for (src, _g, act, dst) in guarded_edges:
            if isinstance(act, Push):
                new = R[dst] | touches(act.frame) | R[src]
                if new != R[dst]:
                    R[dst] = new
                    changed = True
        for (a, b) in hpairs:
            new = R[b] | R[a]
            if new != R[b]:
                R[b] = new
                changed = True
    return R


def analyze_gc_approx(e: Exp, policy, deadline=None, node_limit=None,
                      snapshot_cb=None) -> AnalysisResult:
    """GC pushdown analysis over plain control states: each node caches an
    over-approximate root set R; edges record the guard (R at emission);
    when R grows the node is re-stepped and recorded guards go stale but
    stay in the graph."""
    root = ControlState.make(e, EMPTY_ENV, EMPTY_STORE, ())
    graph = CRPDS(root)
    ecg = ECG()
    guarded = {}  # (src, guard-key, act, dst) -> (src, guard, act, dst)
    R = {root: frozenset()}
    # root-flow successors: H pairs and push edges
    push_out = {}  # src -> {(frame, dst): None}
    # frames that may sit on top at a node, with their pusher
    frame_cands = {}  # node -> {(frame, pusher): None}
    dS, dE, dH = deque(), deque(), deque()
    queued_s, queued_e, queued_h = {root}, set(), set()
    dS.append(root)
    saturated = True
    ecg.add(root, root)

    def snapshot():
        if snapshot_cb is not None:
            snapshot_cb(list(guarded.values()), list(ecg.pairs), dict(R))

    def nop(q):
        c = AConf.make(q.exp, q.env, gc_store(q.env, q.store, R[q]), (), q.ctx)
        out = []
        for c2 in astep(c, policy):
            if c2.kont:
                out.append((_cs_of(c2), Push(c2.kont[0])))
            else:
                out.append((_cs_of(c2), UNCH))
        return out

    def top(q, fr):
        c = AConf.make(q.exp, q.env, gc_store(q.env, q.store, R[q]), (fr,),
                       q.ctx)
        return [(_cs_of(c2), Pop(fr)) for c2 in astep(c, policy)
                if not c2.kont]

    def enq_state(q):
        if q not in R:
            R[q] = frozenset()
        if q not in graph.nodes:
            graph.add_node(q)
            enq_pair((q, q))
        if q not in queued_s:
            queued_s.add(q)
            dS.append(q)

    def enq_edge(el):
        key = (el[0], _roots_key(el[1]), el[2], el[3])
        if key not in guarded and key not in queued_e:
            queued_e.add(key)
            dE.append(el)

    def enq_pair(p):
        if p not in queued_h and not ecg.has(*p):
            queued_h.add(p)
            dH.append(p)

    def grow_roots(q, addrs):
        """Monotone root propagation along H and push edges; grown nodes
        are re-stepped and re-matched against their candidate top frames."""
        work = deque()
        if not addrs <= R.get(q, frozenset()):
            R[q] = R.get(q, frozenset()) | addrs
            work.append(q)
        while work:
            x = work.popleft()
            enq_state(x)
            for (fr, pusher) in list(frame_cands.get(x, ())):
                for q2, pact in top(x, fr):
                    enq_edge((x, R[x], pact, q2))
                    enq_pair((pusher, q2))
            for y in ecg.fwd(x):
                if not R[x] <= R[y]:
                    R[y] |= R[x]
                    work.append(y)
            for (fr, y) in push_out.get(x, ()):
                flow = R[x] | touches(fr)
                if not flow <= R.get(y, frozenset()):
                    R[y] = R.get(y, frozenset()) | flow
                    work.append(y)

    def match_push(src, fr, dst):
        """Pop-matching for a push edge across the ε-closure of its target."""
        for q1 in ecg.descendants(dst):
            frame_cands.setdefault(q1, {})[(fr, src)] = None
            for q2, pact in top(q1, fr):
                enq_edge((q1, R[q1], pact, q2))
                enq_pair((src, q2))

    ticks = 0
    while dH or dE or dS:
        ticks += 1
        if ticks % 64 == 0:
            if deadline is not None and time.monotonic() > deadline:
                saturated = False
                break
            if node_limit is not None and len(graph.nodes) > node_limit:
                saturated = False
                break
        if dH:
            p = dH.popleft()
            queued_h.discard(p)
            if ecg.has(*p):
                snapshot()
                continue
            s2, s3 = p
            enq_state(s2)
            enq_state(s3)
            anc = ecg.ancestors(s2)
            desc = ecg.descendants(s3)
            ecg.add(*p)
            grow_roots(s3, R.get(s2, frozenset()))
            for s1 in anc:
                for src, fr in graph.push_into(s1):
                    for s4 in desc:
                        frame_cands.setdefault(s4, {})[(fr, src)] = None
                        for q2, pact in top(s4, fr):
                            enq_edge((s4, R[s4], pact, q2))
                            enq_pair((src, q2))
            for s1 in anc:
                for s4 in desc:
                    enq_pair((s1, s4))
        elif dE:
            el = dE.popleft()
            src, guard, act, dst = el
            key = (src, _roots_key(guard), act, dst)
            queued_e.discard(key)
            if key in guarded:
                snapshot()
                continue
            guarded[key] = el
            graph.add_edge((src, act, dst))
            enq_state(dst)
            if act is UNCH:
                # roots flow once the ε pair lands, not at edge insertion
                enq_pair((src, dst))
            elif isinstance(act, Push):
                push_out.setdefault(src, {})[(act.frame, dst)] = None
                grow_roots(dst, R.get(src, frozenset()) | touches(act.frame))
                match_push(src, act.frame, dst)
            else:
                for s1 in ecg.ancestors(src):
                    for psrc, fr in graph.push_into(s1):
                        if fr == act.frame:
                            enq_pair((psrc, dst))
        else:
            q = dS.popleft()
            queued_s.discard(q)
            for q2, act in nop(q):
                enq_edge((q, R[q], act, q2))
        snapshot()
    res = AnalysisResult("pdcfa-gc-approx", policy, True, graph, ecg, e,
                         saturated, root_cache=dict(R),
                         guarded_edges=list(guarded.values()))
    stale = sum(1 for (s, g, a, d) in res.guarded_edges
                if g != R.get(s, frozenset()))
    res.extras["stale_guards"] = stale
    return res


# ---------------------------------------------------------------------------
# finite baseline (plain k-CFA, optionally GC-composed)


def analyze_finite(e: Exp, policy, gc: bool = False, deadline=None,
                   node_limit=None) -> AnalysisResult:
    root = finject(e)
    graph = CRPDS(root)
    kstore = {}
    deps = {}  # kaddr -> {state: None}
    queue = deque([root])
    queued = {root}
    saturated = True
    ticks = 0
    while queue:
        ticks += 1
        if ticks % 64 == 0:
            if deadline is not None and time.monotonic() > deadline:
                saturated = False
                break
            if node_limit is not None and len(graph.nodes) > node_limit:
                saturated = False
                break
        st = queue.popleft()
        queued.discard(st)
        used_kas = {st.kaddr}
        stepped = st
        if gc:
            roots = set()
            work = [st.kaddr]
            while work:
                ka = work.pop()
                if ka is K_HALT:
                    continue
                for fr, ka2 in kstore.get(ka, ()):
                    roots |= touches(fr)
                    if ka2 not in used_kas:
                        used_kas.add(ka2)
                        work.append(ka2)
            store2 = gc_store(st.env, st.store, frozenset(roots))
            stepped = FState.make(st.exp, st.env, store2, st.ctx, st.kaddr)
        for ka in used_kas:
            deps.setdefault(ka, {})[st] = None
        grew_ka = None
        if isinstance(st.exp, Let1):
            before = {ka: len(v) for ka, v in kstore.items()}
        succs, _ = astep_finite(stepped, kstore, policy)
        if isinstance(st.exp, Let1):
            for ka, v in kstore.items():
                if len(v) != before.get(ka, 0):
                    grew_ka = ka
        for s2 in succs:
            if isinstance(st.exp, Let1):
                act = "push"
            elif s2.kaddr is not st.kaddr:
                act = "pop"
            else:
                act = "eps"
            new = s2 not in graph.nodes
            graph.add_edge((st, act, s2))
            if new and s2 not in queued:
                queued.add(s2)
                queue.append(s2)
        if grew_ka is not None:
            # a new continuation landed at grew_ka: every state whose pops or
            # (under GC) roots depended on it must be revisited
            for dep in list(deps.get(grew_ka, ())):
                if dep not in queued:
                    queued.add(dep)
                    queue.append(dep)
    kind = "plain-gc" if gc else "plain"
    return AnalysisResult(kind, policy, gc, graph, None, e, saturated,
                          kstore=kstore)
