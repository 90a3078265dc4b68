"""Reference methods: independent per-node OMP with vote fusion, and S-OMP."""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError, SingularProjectionError
from .model import ProblemInstance, SupportSet
from .omp_kernel import RESIDUAL_FLOOR, omp_path, residual_after_projection

TOP_K = "top-k"
THRESHOLD = "threshold"


def d_omp_independent(instance: ProblemInstance, k):
    """Plain OMP at every node, no communication.

    Returns ``(supports, failed)``; a node whose projection turns singular
    reports an empty support and ``failed[l] = True``.
    """
    supports, failed = [], []
    for y, theta in zip(instance.observations, instance.dictionaries):
        try:
            supports.append(SupportSet(omp_path(y, theta, k), instance.n))
            failed.append(False)
        except SingularProjectionError:
            supports.append(SupportSet.empty(instance.n))
            failed.append(True)
    return supports, failed


def vote_table(supports, n=None) -> np.ndarray:
    n = supports[0].n if n is None else n
    votes = np.zeros(n, dtype=int)
    for s in supports:
        votes[list(s.indices)] += 1
    return votes


def majority_fuse(supports, k, rule=TOP_K) -> SupportSet:
    """Global support from per-node votes.

    ``top-k`` keeps the ``k`` most voted indices (ties to the lowest index).
    ``threshold`` keeps indices voted by at least half the nodes, still
    capped at ``k``.
    """
    if not supports:
        raise InvalidParameterError("need at least one support to fuse")
    votes = vote_table(supports)
    order = np.lexsort((np.arange(votes.size), -votes))
    order = order[votes[order] > 0]
    if rule == THRESHOLD:
        order = order[votes[order] >= -(-len(supports) // 2)]
    elif rule != TOP_K:
        raise InvalidParameterError(f"unknown majority rule {rule!r}")
    return SupportSet(tuple(order[:k]), votes.size)


def s_omp_path(observations, dictionaries, k, normalize=True) -> list:
    """Simultaneous OMP: one common index per iteration.

    The index maximizes the sum over nodes of ``|<r_l, theta_l,w>|``, each
    term divided by ``||r_l||`` when ``normalize`` is set.
    """
    dictionaries = [np.asarray(d, dtype=float) for d in dictionaries]
    m, n = dictionaries[0].shape
    if not 0 <= k <= m:
        raise InvalidParameterError(f"need 0 <= k <= M={m}, got {k}")
    ys = [np.asarray(y, dtype=float) for y in observations]
    floors = [RESIDUAL_FLOOR * np.linalg.norm(y) for y in ys]
    residuals = [y.copy() for y in ys]
    selected = []
    for _ in range(k):
        score = np.zeros(n)
        live = 0
        for r, d, floor in zip(residuals, dictionaries, floors):
            norm = np.linalg.norm(r)
            if norm <= floor:
                continue
            live += 1
            c = np.abs(d.T @ r)
            score += c / norm if normalize else c
        if live == 0:
            break
        score[selected] = -np.inf
        selected.append(int(np.argmax(score)))
        residuals = [residual_after_projection(d, selected, y) for d, y in zip(dictionaries, ys)]
    return selected


def s_omp_run(instance: ProblemInstance, k, normalize=True) -> SupportSet:
    return SupportSet(s_omp_path(instance.observations, instance.dictionaries, k, normalize), instance.n)
