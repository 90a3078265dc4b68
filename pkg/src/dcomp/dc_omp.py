"""Synchronous-round simulation of collaborative OMP over a node network."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateResidualError, InvalidParameterError, SingularProjectionError
from .fusion import AnnouncementRound, FusionOutcome, fuse_broadcast, fuse_neighborhood, round_rng
from .model import ProblemInstance, SupportSet
from .omp_kernel import OmpState, match_index, residual_after_projection

BROADCAST = "broadcast"
PARTIAL = "partial"


@dataclass(frozen=True)
class NetworkTopology:
    """Neighborhoods ``neighbors[l]``, each containing ``l`` itself."""

    n_nodes: int
    neighbors: tuple

    def __post_init__(self):
        nbrs = tuple(frozenset(int(j) for j in s) for s in self.neighbors)
        if len(nbrs) != self.n_nodes:
            raise InvalidParameterError("need one neighborhood per node")
        for l, s in enumerate(nbrs):
            if l not in s:
                raise InvalidParameterError(f"node {l} missing from its own neighborhood")
            if not s <= set(range(self.n_nodes)):
                raise InvalidParameterError(f"node {l} has a neighbor outside the network")
        object.__setattr__(self, "neighbors", nbrs)

    @property
    def mode(self) -> str:
        full = frozenset(range(self.n_nodes))
        return BROADCAST if all(s == full for s in self.neighbors) else PARTIAL

    @classmethod
    def broadcast(cls, n_nodes):
        full = range(n_nodes)
        return cls(n_nodes, tuple(full for _ in full))

    @classmethod
    def ring(cls, n_nodes, degree):
        """Each node hears the ``degree`` nearest nodes on either side."""
        return cls(n_nodes, tuple({(l + d) % n_nodes for d in range(-degree, degree + 1)}
                                  for l in range(n_nodes)))

    @classmethod
    def random(cls, n_nodes, p, rng):
        """Symmetric Erdos-Renyi neighborhoods with edge probability ``p``."""
        upper = np.triu(rng.random((n_nodes, n_nodes)) < p, 1)
        adj = upper | upper.T | np.eye(n_nodes, dtype=bool)
        return cls(n_nodes, tuple(set(np.flatnonzero(row)) for row in adj))

    @classmethod
    def parse(cls, spec, n_nodes, rng=None):
        """Build from ``broadcast``, ``ring:<d>`` or ``random:<p>``."""
        kind, _, arg = spec.partition(":")
        if kind == BROADCAST and not arg:
            return cls.broadcast(n_nodes)
        try:
            if kind == "ring":
                return cls.ring(n_nodes, int(arg))
            if kind == "random":
                p = float(arg)
                if not 0.0 <= p <= 1.0:
                    raise InvalidParameterError(f"edge probability {p} not in [0, 1]")
                return cls.random(n_nodes, p, rng if rng is not None else np.random.default_rng(0))
        except ValueError as exc:
            raise InvalidParameterError(f"bad topology {spec!r}: {exc}") from None
        raise InvalidParameterError(f"unknown topology {spec!r}")


@dataclass
class DcOmpResult:
    per_node_support: list
    per_node_iterations: list
    failed: list = field(default_factory=list)
    rounds: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    decisions: Optional[list] = None

    @property
    def mean_iterations(self) -> float:
        return float(np.mean(self.per_node_iterations))


def _ordered(fused, counts=None):
    if isinstance(fused, FusionOutcome):
        counts = fused.counts if counts is None else counts
        fused = fused.fused
    counts = counts or {}
    return sorted({int(i) for i in fused}, key=lambda i: (-counts.get(i, 0), i))


def _admit(current, fused, k, counts=None) -> list:
    """Fused indices admitted into ``current`` without exceeding ``k``."""
    held = set(current)
    room = k - len(held)
    return [i for i in _ordered(fused, counts) if i not in held][:max(room, 0)]


def truncate_fused(current: SupportSet, fused, k, counts=None) -> SupportSet:
    """``current`` plus as many fused indices as fit under cardinality ``k``.

    Higher-multiplicity indices (per ``counts``) go first; ties by index.
    """
    return current.union(_admit(current.indices, fused, k, counts))


class _NodeHook:
    """No-op per-node callbacks; the detection variant overrides these."""

    def before_update(self, node, t, heard) -> bool:
        return False

    def after_update(self, node, t, finished) -> bool:
        return False

    def trace_fields(self, node) -> dict:
        return {}


def run_rounds(instance: ProblemInstance, topology: NetworkTopology, k, shared_seed=None,
               hook: Optional[_NodeHook] = None, trace=False) -> DcOmpResult:
    """Shared engine behind :func:`dc_omp_run` and detection.

    Each round every active node matches its residual, announces the index,
    fuses what it hears, extends its support and reprojects. A hook returning
    True empties that node's support and retires it.
    """
    L = instance.n_nodes
    if topology.n_nodes != L:
        raise InvalidParameterError(f"topology has {topology.n_nodes} nodes, instance has {L}")
    if not 0 <= k <= instance.m:
        raise InvalidParameterError(f"need 0 <= k <= M={instance.m}, got {k}")
    hook = hook or _NodeHook()
    shared_seed = instance.shared_seed if shared_seed is None else shared_seed
    broadcast = topology.mode == BROADCAST
    n = instance.n

    dicts = instance.dictionaries
    ys = instance.observations
    states = [OmpState.initial(y, d) for y, d in zip(ys, dicts)]
    iterations = [0] * L
    failed = [False] * L
    active = [k > 0] * L
    result = DcOmpResult([], iterations, failed)

    t = 0
    while any(active):
        t += 1
        own = {}
        for l in range(L):
            if not active[l]:
                continue
            try:
                own[l] = match_index(states[l])
            except DegenerateResidualError:
                active[l] = False
                continue
            iterations[l] += 1
        if not own:
            break
        rnd = AnnouncementRound(t, tuple(sorted(own.items())))
        result.rounds.append(rnd)

        # fusion sees only this round's announcements and last round's states
        planned = {}
        for l, lam in own.items():
            heard = rnd if broadcast else rnd.restrict(topology.neighbors[l])
            if broadcast:
                # fresh generator per node: identical draws everywhere
                outcome = fuse_broadcast(heard, round_rng(shared_seed, t), own_prev=states[l].selected)
            else:
                outcome = fuse_neighborhood(heard, lam, states[l].selected)
            planned[l] = (heard, outcome)

        for l, (heard, outcome) in planned.items():
            st = states[l]
            if hook.before_update(l, t, heard):
                states[l] = OmpState.initial(ys[l], dicts[l])
                active[l] = False
                _trace(result, trace, l, t, own[l], outcome, states[l], hook)
                continue
            added = _admit(st.selected, outcome, k)
            if added:
                selected = st.selected + tuple(added)
                try:
                    residual = residual_after_projection(dicts[l], selected, ys[l])
                    states[l] = OmpState(residual, selected, st.iteration + 1, st.dictionary, st.y_norm)
                except SingularProjectionError:
                    failed[l] = True
                    active[l] = False
            done = len(states[l].selected) >= k
            if hook.after_update(l, t, done):
                states[l] = OmpState.initial(ys[l], dicts[l])
                done = True
            if done:
                active[l] = False
            _trace(result, trace, l, t, own[l], outcome, states[l], hook)

    result.per_node_support = [SupportSet(s.selected, n) for s in states]
    return result


def _trace(result, enabled, node, t, announced, outcome, state, hook):
    if not enabled:
        return
    row = {
        "round": t,
        "node": node,
        "announced_index": announced,
        "fused_indices": " ".join(str(i) for i in outcome.fused),
        "support_size": len(state.selected),
        "residual_norm": state.residual_norm,
    }
    row.update(hook.trace_fields(node))
    result.trace.append(row)


def dc_omp_run(instance: ProblemInstance, topology: NetworkTopology, k, shared_seed=None,
               trace=False) -> DcOmpResult:
    """Collaborative OMP: every node stops once it holds ``k`` indices."""
    return run_rounds(instance, topology, k, shared_seed, trace=trace)
