"""Per-round index fusion across a node's neighborhood.

Two rules: full broadcast, where every node sees every announcement and all
nodes must end up with the same fused set, and neighborhood fusion, where a
node only sees its neighbors and falls back to its own index.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np

DUPLICATES = "duplicates-found"
RANDOM_FALLBACK = "random-fallback"
OWN_FALLBACK = "own-index-fallback"


@dataclass(frozen=True)
class AnnouncementRound:
    """Indices announced in round ``iteration`` as ``(node_id, index)`` pairs."""

    iteration: int
    announcements: tuple

    @classmethod
    def from_indices(cls, indices, iteration=1):
        return cls(iteration, tuple(enumerate(int(i) for i in indices)))

    @property
    def values(self) -> list:
        return [idx for _, idx in self.announcements]

    def counts(self) -> Counter:
        return Counter(self.values)

    def restrict(self, nodes) -> "AnnouncementRound":
        nodes = set(nodes)
        return AnnouncementRound(self.iteration,
                                 tuple(a for a in self.announcements if a[0] in nodes))

    def __len__(self):
        return len(self.announcements)


@dataclass(frozen=True)
class FusionOutcome:
    """``fused`` is ordered by decreasing multiplicity, then by index."""

    fused: tuple
    mode: str
    counts: dict

    @property
    def as_set(self) -> set:
        return set(self.fused)


def _by_multiplicity(indices, counts):
    return tuple(sorted(indices, key=lambda i: (-counts.get(i, 0), i)))


def duplicate_indices(round_: AnnouncementRound) -> set:
    """Index values announced by two or more nodes."""
    return {idx for idx, c in round_.counts().items() if c >= 2}


def _suppress(candidates, own_index, own_prev):
    """Replace already-held candidates by the node's own index."""
    prev = set(own_prev)
    kept = [i for i in candidates if i not in prev]
    if len(kept) < len(candidates) and own_index is not None and own_index not in prev:
        if own_index not in kept:
            kept.append(own_index)
    return kept


def fuse_broadcast(round_: AnnouncementRound, shared_rng=None, own_prev=()) -> FusionOutcome:
    """Case with every node in every neighborhood.

    Without duplicates one announcement is adopted by all nodes: the node
    picked first by a permutation drawn from ``shared_rng`` (or the lowest
    node id when ``shared_rng`` is None). The result depends only on the
    round and the shared generator state, so every node computes the same
    outcome.
    """
    counts = dict(round_.counts())
    dup = duplicate_indices(round_)
    if dup:
        fused, mode = dup, DUPLICATES
    else:
        nodes = sorted(node for node, _ in round_.announcements)
        if shared_rng is not None:
            nodes = [nodes[i] for i in shared_rng.permutation(len(nodes))]
        chosen = dict(round_.announcements)[nodes[0]]
        fused, mode = {chosen}, RANDOM_FALLBACK
    fused = [i for i in fused if i not in set(own_prev)]
    return FusionOutcome(_by_multiplicity(fused, counts), mode, counts)


def fuse_neighborhood(round_: AnnouncementRound, own_index, own_prev=(), shared_rng=None) -> FusionOutcome:
    """Plurality fusion over a partial neighborhood.

    All indices attaining the maximum multiplicity are fused when that
    multiplicity is at least two; otherwise the node keeps its own index.
    Candidates already in ``own_prev`` are swapped for ``own_index``.
    ``shared_rng`` is accepted for signature symmetry and unused.
    """
    counts = dict(round_.counts())
    top = max(counts.values())
    if top >= 2:
        candidates = sorted(i for i, c in counts.items() if c == top)
        mode = DUPLICATES
    else:
        candidates = [own_index]
        mode = OWN_FALLBACK
    fused = _suppress(candidates, own_index, own_prev)
    if own_index in set(own_prev):
        fused = [i for i in fused if i != own_index]
    return FusionOutcome(_by_multiplicity(fused, counts), mode, counts)


def round_rng(shared_seed, iteration) -> np.random.Generator:
    """Generator common to all nodes for one round."""
    return np.random.default_rng(np.random.SeedSequence(int(shared_seed), spawn_key=(int(iteration),)))


def write_announcements(rounds, path_or_file, trial=0):
    """Write ``(trial, round, node, index)`` rows, one per announcement."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(["trial", "round", "node", "index"])
        for r in rounds:
            for node, idx in r.announcements:
                w.writerow([trial, r.iteration, node, idx])
    finally:
        if own:
            fh.close()
