"""Single-node OMP: matching, least-squares residual update, full runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateResidualError, InvalidParameterError, SingularProjectionError
from .model import SupportSet

# ||r|| <= RESIDUAL_FLOOR * ||y|| counts as "no energy left"
RESIDUAL_FLOOR = 1e-12
# relative |R_ii| threshold below which the selected columns are rank deficient
RANK_TOL = 1e-10


@dataclass(frozen=True)
class OmpState:
    """Per-node OMP state.

    ``selected`` keeps indices in the order they were added; use
    :attr:`support` for the sorted set.
    """

    residual: np.ndarray
    selected: tuple
    iteration: int
    dictionary: np.ndarray
    y_norm: float

    @classmethod
    def initial(cls, y, dictionary):
        y = np.asarray(y, dtype=float)
        return cls(y.copy(), (), 0, dictionary, float(np.linalg.norm(y)))

    @property
    def support(self) -> SupportSet:
        return SupportSet(self.selected, self.dictionary.shape[1])

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))

    def is_degenerate(self) -> bool:
        return self.residual_norm <= RESIDUAL_FLOOR * self.y_norm


def correlations(state: OmpState) -> np.ndarray:
    """Normalized correlations ``|<r, theta_w>| / ||r||`` for every column."""
    return np.abs(state.dictionary.T @ state.residual) / state.residual_norm


def match_index(state: OmpState, exclude=None) -> int:
    """Column most correlated with the residual, skipping ``exclude``.

    ``exclude`` defaults to the already selected columns. Ties go to the
    lowest index.
    """
    if state.is_degenerate():
        raise DegenerateResidualError("residual norm below floor")
    score = np.abs(state.dictionary.T @ state.residual)
    skip = state.selected if exclude is None else tuple(exclude)
    if skip:
        score[list(skip)] = -np.inf
    # argmax returns the first maximizer
    return int(np.argmax(score))


def residual_after_projection(dictionary, columns, y) -> np.ndarray:
    """``y`` minus its least-squares fit on ``dictionary[:, columns]``.

    Uses a thin QR factorization; raises :class:`SingularProjectionError`
    when the submatrix is numerically rank deficient.
    """
    y = np.asarray(y, dtype=float)
    if len(columns) == 0:
        return y.copy()
    sub = dictionary[:, list(columns)]
    if sub.shape[1] > sub.shape[0]:
        raise SingularProjectionError(
            f"{sub.shape[1]} columns cannot be independent in R^{sub.shape[0]}")
    q, r = np.linalg.qr(sub)
    diag = np.abs(np.diag(r))
    scale = np.linalg.norm(sub, axis=0).max()
    if scale == 0.0 or diag.min() <= RANK_TOL * scale:
        raise SingularProjectionError("selected columns are rank deficient")
    return y - q @ (q.T @ y)


def project_and_update(state: OmpState, new_indices, y) -> OmpState:
    """Add ``new_indices`` to the selection and recompute the residual from ``y``."""
    added = tuple(int(i) for i in new_indices if int(i) not in state.selected)
    selected = state.selected + added
    residual = residual_after_projection(state.dictionary, selected, y)
    return OmpState(residual, selected, state.iteration + 1, state.dictionary, state.y_norm)


def omp_path(y, dictionary, k) -> list:
    """Indices chosen by ``k`` rounds of OMP, in selection order.

    Stops early if the residual vanishes.
    """
    dictionary = np.asarray(dictionary, dtype=float)
    if k < 0 or k > dictionary.shape[0]:
        raise InvalidParameterError(f"need 0 <= k <= M={dictionary.shape[0]}, got {k}")
    state = OmpState.initial(y, dictionary)
    for _ in range(k):
        if state.is_degenerate():
            break
        state = project_and_update(state, [match_index(state)], y)
    return list(state.selected)


def omp_run(y, dictionary, k) -> SupportSet:
    dictionary = np.asarray(dictionary, dtype=float)
    return SupportSet(omp_path(y, dictionary, k), dictionary.shape[1])
