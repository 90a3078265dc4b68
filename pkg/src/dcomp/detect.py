"""Joint signal detection and support estimation.

Nodes run collaborative OMP and accumulate an agreement score from how often
announcements in their neighborhood coincide. At the detection round the
score is compared to a threshold: below it the node declares the signal
absent and reports an empty support; otherwise it carries on to ``k``
indices exactly as plain collaborative OMP would.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .dc_omp import DcOmpResult, NetworkTopology, _NodeHook, run_rounds
from .errors import InvalidParameterError
from .fusion import AnnouncementRound
from .model import H0, H1, ProblemInstance

ENTRIES = "entries"
DISTINCT = "distinct"
# ENTRIES alarms on a single chance collision under noise, see README
DEFAULT_RHO = DISTINCT


@dataclass(frozen=True)
class DetectionConfig:
    k0: int = 3
    i0: int = 2
    prior_h1: float = 0.5
    rho_reading: str = DEFAULT_RHO

    def __post_init__(self):
        if self.k0 < 1 or self.i0 < 1:
            raise InvalidParameterError("need k0 >= 1 and i0 >= 1")
        if not 0.0 <= self.prior_h1 <= 1.0:
            raise InvalidParameterError("prior_h1 must lie in [0, 1]")
        if self.rho_reading not in (ENTRIES, DISTINCT):
            raise InvalidParameterError(f"unknown rho reading {self.rho_reading!r}")


@dataclass(frozen=True)
class DetectionState:
    i_index: int = 0
    decided: Optional[str] = None


def rho(round_: AnnouncementRound, reading=DEFAULT_RHO) -> int:
    """Agreement count of a round.

    ``entries`` counts announcements whose value is repeated ([1, 1, 3] -> 2);
    ``distinct`` counts repeated values ([1, 1, 3] -> 1).
    """
    repeated = [c for c in round_.counts().values() if c >= 2]
    if reading == DISTINCT:
        return len(repeated)
    return sum(repeated)


def update_i_index(state: DetectionState, round_: AnnouncementRound, neighborhood_size,
                   reading=DEFAULT_RHO) -> DetectionState:
    if state.decided is not None:
        raise InvalidParameterError("detection state is already decided")
    if len(set(round_.values)) == neighborhood_size:
        return state
    return replace(state, i_index=state.i_index + rho(round_, reading))


def decide(state: DetectionState, t, cfg: DetectionConfig) -> Optional[str]:
    if t != cfg.k0:
        return None
    return H1 if state.i_index >= cfg.i0 else H0


class _Detector(_NodeHook):
    def __init__(self, n_nodes, cfg):
        self.cfg = cfg
        self.states = [DetectionState() for _ in range(n_nodes)]

    def _settle(self, node, t):
        st = self.states[node]
        verdict = decide(st, t, self.cfg)
        if verdict is not None:
            self.states[node] = replace(st, decided=verdict)
        return verdict

    def before_update(self, node, t, heard):
        st = self.states[node]
        if st.decided is not None:
            return False
        self.states[node] = update_i_index(st, heard, len(heard), self.cfg.rho_reading)
        return self._settle(node, t) == H0

    def after_update(self, node, t, finished):
        st = self.states[node]
        if not finished or st.decided is not None:
            return False
        # support filled before the detection round: decide now on the score so far
        verdict = H1 if st.i_index >= self.cfg.i0 else H0
        self.states[node] = replace(st, decided=verdict)
        return verdict == H0

    def trace_fields(self, node):
        st = self.states[node]
        return {"i_index": st.i_index, "decision": st.decided or ""}

    def finalize(self):
        for l, st in enumerate(self.states):
            if st.decided is None:
                self.states[l] = replace(st, decided=H1 if st.i_index >= self.cfg.i0 else H0)
        return [st.decided for st in self.states]


def trial_decision(decisions) -> str:
    """Majority of node decisions; ties count as detection."""
    h1 = sum(d == H1 for d in decisions)
    return H1 if 2 * h1 >= len(decisions) else H0


def detect_and_estimate(instance: ProblemInstance, topology: NetworkTopology, k,
                        cfg: DetectionConfig, shared_seed=None, trace=False):
    """Returns ``(decision, result)`` with ``result.decisions`` per node."""
    if not cfg.k0 < k:
        raise InvalidParameterError(f"detection round k0={cfg.k0} must be below k={k}")
    det = _Detector(instance.n_nodes, cfg)
    result: DcOmpResult = run_rounds(instance, topology, k, shared_seed, hook=det, trace=trace)
    result.decisions = det.finalize()
    for l, d in enumerate(result.decisions):
        if d == H0 and len(result.per_node_support[l]):
            result.per_node_support[l] = type(result.per_node_support[l]).empty(instance.n)
    return trial_decision(result.decisions), result
