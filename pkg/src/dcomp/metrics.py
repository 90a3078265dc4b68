"""Per-trial scoring and Monte Carlo aggregation.

When a record carries several per-node estimates (collaborative runs) the
support metrics are averaged over nodes; under broadcast fusion all nodes
hold the same support so the average equals the common value.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientDataError, InvalidParameterError
from .model import H0, H1, SupportSet

Z95 = 1.959963984540054

SUMMARY_COLUMNS = ["algorithm", "M", "N", "K", "L", "snr_db", "metric", "value",
                   "ci_low", "ci_high", "trials"]


@dataclass
class TrialRecord:
    algorithm: str
    m: int
    trial: int
    hypothesis: str
    true_support: SupportSet
    estimates: list
    rounds_per_node: list
    signal_support: Optional[SupportSet] = None
    decision: Optional[str] = None
    failed: list = field(default_factory=list)

    def __post_init__(self):
        if self.hypothesis == H0 and len(self.true_support):
            raise InvalidParameterError("true support must be empty under H0")
        if self.signal_support is None:
            self.signal_support = self.true_support


def _matches(est: SupportSet, target: SupportSet) -> bool:
    return est.indices == target.indices


def exact_recovery(record: TrialRecord) -> float:
    """1 when the estimated binary support equals the true one (node-averaged)."""
    if not record.estimates:
        raise InvalidParameterError("record has no estimate")
    return float(np.mean([_matches(e, record.true_support) for e in record.estimates]))


def fraction_recovered(record: TrialRecord) -> float:
    k = len(record.true_support)
    if k == 0:
        raise InvalidParameterError("fraction recovered needs a nonempty true support")
    truth = set(record.true_support)
    return float(np.mean([len(truth & set(e)) / k for e in record.estimates]))


def _hit_rate(records, target):
    """Node-averaged Pr(estimate == target(record)) per record."""
    return np.array([np.mean([_matches(e, target(r)) for e in r.estimates]) for r in records])


def detection_metrics(records, prior_h1=0.5, with_ci=False):
    """``(P_D^s, P_F^s, P_D^u, P_F^u)`` from H1 and H0 trial records.

    ``P_D^u`` and ``P_F^u`` are the prior-weighted mixtures of support-level
    hit rates. With ``with_ci`` each entry becomes ``(value, half_width)``.
    """
    h1 = [r for r in records if r.hypothesis == H1]
    h0 = [r for r in records if r.hypothesis == H0]
    if not h1 or not h0:
        raise InsufficientDataError("detection metrics need records under both hypotheses")
    p1, p0 = prior_h1, 1.0 - prior_h1
    empty = lambda r: SupportSet.empty(r.true_support.n)
    sig = lambda r: r.signal_support

    det1 = np.array([r.decision == H1 for r in h1], dtype=float)
    det0 = np.array([r.decision == H1 for r in h0], dtype=float)
    b1_h1, b0_h0 = _hit_rate(h1, sig), _hit_rate(h0, empty)
    b1_h0, b0_h1 = _hit_rate(h0, sig), _hit_rate(h1, empty)

    def mix(a, b):
        value = p1 * a.mean() + p0 * b.mean()
        half = Z95 * np.sqrt(p1**2 * _var_of_mean(a) + p0**2 * _var_of_mean(b))
        return value, half

    out = [
        (det1.mean(), Z95 * np.sqrt(_var_of_mean(det1))),
        (det0.mean(), Z95 * np.sqrt(_var_of_mean(det0))),
        mix(b1_h1, b0_h0),
        mix(b1_h0, b0_h1),
    ]
    if with_ci:
        return tuple((float(v), float(h)) for v, h in out)
    return tuple(float(v) for v, _ in out)


def _var_of_mean(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 0.0
    return float(x.var(ddof=1) / x.size)


def mean_ci(values):
    """Mean with a normal-approximation 95% interval, clipped to the data range."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise InsufficientDataError("no values to aggregate")
    m = float(x.mean())
    half = Z95 * np.sqrt(_var_of_mean(x))
    return m, max(m - half, float(x.min())), min(m + half, float(x.max()))


def aggregate(records, prior_h1=0.5):
    """Summary rows keyed by ``(algorithm, M)``.

    Returns a list of dicts with keys ``algorithm, M, metric, value, ci_low,
    ci_high, trials``; ``trials`` counts records behind the row.
    """
    cells = defaultdict(list)
    for r in records:
        cells[(r.algorithm, r.m)].append(r)
    rows = []
    for (alg, m), recs in sorted(cells.items()):
        h1 = [r for r in recs if r.hypothesis == H1]
        h0 = [r for r in recs if r.hypothesis == H0]
        if h1:
            for name, fn in (("exact_recovery", exact_recovery), ("fraction_recovered", fraction_recovered)):
                rows.append(_row(alg, m, name, mean_ci([fn(r) for r in h1]), len(h1)))
            rows.append(_row(alg, m, "mean_rounds",
                             mean_ci([np.mean(r.rounds_per_node) for r in h1]), len(h1)))
        if h1 and h0 and all(r.decision is not None for r in recs):
            names = ("P_D_s", "P_F_s", "P_D_u", "P_F_u")
            for name, (v, half) in zip(names, detection_metrics(recs, prior_h1, with_ci=True)):
                rows.append(_row(alg, m, name, (v, max(v - half, 0.0), min(v + half, 1.0)), len(recs)))
    return rows


def _row(alg, m, metric, stats, trials):
    value, lo, hi = stats
    return {"algorithm": alg, "M": m, "metric": metric, "value": value,
            "ci_low": lo, "ci_high": hi, "trials": trials}
