"""Monte Carlo experiment driver.

A trial is identified by ``(seed, M, trial, hypothesis)``; its instance is
regenerated from that key alone, so trials can run in any order or in
separate processes and still produce identical records. All algorithms in a
cell see the same instances.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace


from .baselines import TOP_K, THRESHOLD, d_omp_independent, majority_fuse, s_omp_path
from .dc_omp import NetworkTopology, dc_omp_run
from .detect import DEFAULT_RHO, DISTINCT, ENTRIES, DetectionConfig, detect_and_estimate
from .errors import ConfigError, InvalidParameterError
from .metrics import SUMMARY_COLUMNS, TrialRecord, aggregate
from .model import GAUSSIAN, H0, H1, UNIT, SupportSet, make_instance, substream

log = logging.getLogger(__name__)

DC_OMP = "dc-omp"
D_OMP = "d-omp"
S_OMP = "s-omp"
DETECT = "dc-omp-detect"
ALGORITHMS = (DC_OMP, D_OMP, S_OMP, DETECT)

DEFAULT_RATIOS = tuple(round(0.05 * i, 2) for i in range(1, 11))
_TOPOLOGY_KEY = 2**31 - 1

TRACE_COLUMNS = ["algorithm", "M", "hypothesis", "trial", "round", "node", "announced_index",
                 "fused_indices", "support_size", "residual_norm", "i_index", "decision"]


@dataclass
class ExperimentConfig:
    n: int = 256
    k: int = 10
    n_nodes: int = 10
    snr_db: float = 17.3227
    ratios: tuple = DEFAULT_RATIOS
    m_values: tuple = ()
    trials: int = 10_000
    topology: str = "broadcast"
    algorithms: tuple = (DC_OMP, D_OMP, S_OMP)
    k0: int = 3
    i0: int = 2
    prior_h1: float = 0.5
    rho_reading: str = DEFAULT_RHO
    amplitude: str = UNIT
    majority_rule: str = TOP_K
    somp_normalize: bool = True
    seed: int = 0
    workers: int = 0  # 0: one per CPU
    out: str = "-"
    trace: str = ""

    @property
    def grid(self) -> list:
        """Measurement counts ``M`` to simulate, ascending."""
        if self.m_values:
            return sorted(int(m) for m in self.m_values)
        return sorted({int(round(r * self.n)) for r in self.ratios})

    def validate(self):
        if self.n < 2:
            raise ConfigError("n", "must be at least 2")
        if not 1 <= self.k < self.n:
            raise ConfigError("k", f"must satisfy 1 <= k < n, got {self.k}")
        if self.n_nodes < 1:
            raise ConfigError("n_nodes", "must be at least 1")
        if self.trials < 1:
            raise ConfigError("trials", "must be at least 1")
        if not self.grid:
            raise ConfigError("ratios", "empty measurement grid")
        for m in self.grid:
            if not self.k <= m < self.n:
                raise ConfigError("ratios" if not self.m_values else "m_values",
                                  f"M={m} violates K <= M < N")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError("algorithms", f"unknown algorithm {a!r}")
        if not self.algorithms:
            raise ConfigError("algorithms", "no algorithm selected")
        if DETECT in self.algorithms and not 1 <= self.k0 < self.k:
            raise ConfigError("k0", f"must satisfy 1 <= k0 < k, got {self.k0}")
        if self.i0 < 1:
            raise ConfigError("i0", "must be at least 1")
        if not 0.0 <= self.prior_h1 <= 1.0:
            raise ConfigError("prior_h1", "must lie in [0, 1]")
        if self.rho_reading not in (ENTRIES, DISTINCT):
            raise ConfigError("rho_reading", f"expected {ENTRIES} or {DISTINCT}")
        if self.amplitude not in (UNIT, GAUSSIAN):
            raise ConfigError("amplitude", f"expected {UNIT} or {GAUSSIAN}")
        if self.majority_rule not in (TOP_K, THRESHOLD):
            raise ConfigError("majority_rule", f"expected {TOP_K} or {THRESHOLD}")
        if self.workers < 0:
            raise ConfigError("workers", "must be nonnegative")
        try:
            self.network()
        except InvalidParameterError as exc:
            raise ConfigError("topology", str(exc)) from None
        return self

    def network(self) -> NetworkTopology:
        return NetworkTopology.parse(self.topology, self.n_nodes, substream(self.seed, _TOPOLOGY_KEY))

    def detection(self) -> DetectionConfig:
        return DetectionConfig(self.k0, self.i0, self.prior_h1, self.rho_reading)

    def hypotheses(self) -> tuple:
        return (H1, H0) if DETECT in self.algorithms else (H1,)


# -- config parsing ---------------------------------------------------------

_ALIASES = {"N": "n", "K": "k", "L": "n_nodes", "M": "m_values", "grid": "ratios"}


def _coerce(name, raw, current):
    try:
        if isinstance(current, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(current, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if name == "algorithms":
                return tuple(items)
            if name == "m_values":
                return tuple(int(s) for s in items)
            return tuple(float(s) for s in items)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r}") from None


def apply_overrides(cfg: ExperimentConfig, pairs) -> ExperimentConfig:
    """Apply ``key=value`` strings (or ``(key, value)`` pairs) to ``cfg``."""
    known = {f.name for f in fields(cfg)}
    updates = {}
    for item in pairs:
        key, value = item.split("=", 1) if isinstance(item, str) else item
        key = _ALIASES.get(key.strip(), key.strip())
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
        updates[key] = _coerce(key, str(value).strip(), getattr(cfg, key))
    return replace(cfg, **updates)


def load_config(path, base=None) -> ExperimentConfig:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected key=value, got {line!r}")
            pairs.append(line)
    return apply_overrides(base or ExperimentConfig(), pairs)


PRESETS = {
    "fig2": dict(algorithms=(DC_OMP, D_OMP, S_OMP)),
    "fig3": dict(algorithms=(DC_OMP, D_OMP)),
    "fig4": dict(algorithms=(DETECT,)),
}


def preset(name) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}")
    return ExperimentConfig(**PRESETS[name])


# -- trials -----------------------------------------------------------------

def trial_instance(cfg: ExperimentConfig, m, trial, hypothesis):
    flag = 1 if hypothesis == H1 else 0
    return make_instance(cfg.n, m, cfg.k, cfg.n_nodes, cfg.snr_db, hypothesis, cfg.seed,
                         key=(m, trial, flag), amplitude_scheme=cfg.amplitude)


def run_algorithm(cfg: ExperimentConfig, algorithm, instance, m, trial, topology=None, trace=False):
    """Run one algorithm on one instance; returns ``(TrialRecord, trace_rows)``."""
    topology = topology or cfg.network()
    k = cfg.k
    common = dict(algorithm=algorithm, m=m, trial=trial, hypothesis=instance.hypothesis,
                  true_support=instance.true_support, signal_support=instance.signal.support)
    rows = []
    if algorithm == DC_OMP:
        res = dc_omp_run(instance, topology, k, trace=trace)
        rec = TrialRecord(estimates=res.per_node_support, rounds_per_node=list(res.per_node_iterations),
                          failed=list(res.failed), **common)
        rows = res.trace
    elif algorithm == DETECT:
        decision, res = detect_and_estimate(instance, topology, k, cfg.detection(), trace=trace)
        rec = TrialRecord(estimates=res.per_node_support, rounds_per_node=list(res.per_node_iterations),
                          failed=list(res.failed), decision=decision, **common)
        rows = res.trace
    elif algorithm == D_OMP:
        supports, failed = d_omp_independent(instance, k)
        fused = majority_fuse(supports, k, cfg.majority_rule)
        rec = TrialRecord(estimates=[fused], rounds_per_node=[len(s) for s in supports],
                          failed=failed, **common)
    elif algorithm == S_OMP:
        path = s_omp_path(instance.observations, instance.dictionaries, k, cfg.somp_normalize)
        rec = TrialRecord(estimates=[SupportSet(path, instance.n)], rounds_per_node=[len(path)], **common)
    else:
        raise ConfigError("algorithms", f"unknown algorithm {algorithm!r}")
    for row in rows:
        row.update(algorithm=algorithm, M=m, hypothesis=instance.hypothesis, trial=trial)
    return rec, rows


def _run_chunk(args):
    cfg, jobs, trace = args
    topology = cfg.network()
    records, rows = [], []
    for m, trial, hypothesis in jobs:
        instance = trial_instance(cfg, m, trial, hypothesis)
        for alg in cfg.algorithms:
            if hypothesis == H0 and alg != DETECT:
                continue
            rec, tr = run_algorithm(cfg, alg, instance, m, trial, topology, trace)
            records.append(rec)
            rows.extend(tr)
    return records, rows


def simulate(cfg: ExperimentConfig, trace=False):
    """All trial records (and trace rows) for ``cfg``, in canonical order."""
    cfg.validate()
    jobs = [(m, t, h) for m in cfg.grid for h in cfg.hypotheses() for t in range(cfg.trials)]
    workers = cfg.workers or default_workers()
    if workers == 1:
        return _run_chunk((cfg, jobs, trace))
    size = max(1, len(jobs) // (workers * 4))
    chunks = [(cfg, jobs[i:i + size], trace) for i in range(0, len(jobs), size)]
    records, rows = [], []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so output does not depend on scheduling
        for recs, tr in pool.map(_run_chunk, chunks):
            records.extend(recs)
            rows.extend(tr)
    return records, rows


def summarize(cfg: ExperimentConfig, records) -> list:
    rows = aggregate(records, cfg.prior_h1)
    for row in rows:
        row.update(N=cfg.n, K=cfg.k, L=cfg.n_nodes, snr_db=cfg.snr_db)
    return rows


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def header_lines(cfg: ExperimentConfig) -> list:
    return [
        f"# grid_M={','.join(str(m) for m in cfg.grid)}",
        f"# seed={cfg.seed} trials={cfg.trials} topology={cfg.topology} amplitude={cfg.amplitude}"
        f" signal_power=K majority_rule={cfg.majority_rule} somp_normalize={cfg.somp_normalize}",
        f"# k0={cfg.k0} i0={cfg.i0} rho={cfg.rho_reading} prior_h1={cfg.prior_h1}",
        "# support metrics are averaged over nodes when an algorithm yields per-node estimates",
    ]


def write_summary(cfg, rows, fh):
    for line in header_lines(cfg):
        fh.write(line + "\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])


def write_trace(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in TRACE_COLUMNS])


def run_experiment(cfg: ExperimentConfig) -> str:
    """Simulate, aggregate and write the summary CSV; returns the CSV text."""
    cfg.validate()
    log.info("running %s over M=%s, %d trials", ",".join(cfg.algorithms), cfg.grid, cfg.trials)
    records, trace_rows = simulate(cfg, trace=bool(cfg.trace))
    buf = io.StringIO()
    write_summary(cfg, summarize(cfg, records), buf)
    text = buf.getvalue()
    if cfg.out and cfg.out != "-":
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    if cfg.trace:
        with open(cfg.trace, "w", newline="") as fh:
            write_trace(trace_rows, fh)
    return text


def replay(cfg: ExperimentConfig, trial, m=None, algorithm=None, hypothesis=H1):
    """Re-run a single trial with tracing; returns ``(TrialRecord, trace_rows)``."""
    cfg.validate()
    m = cfg.grid[0] if m is None else int(m)
    algorithm = algorithm or cfg.algorithms[0]
    if m not in cfg.grid:
        raise ConfigError("M", f"{m} not in grid {cfg.grid}")
    if not 0 <= trial < cfg.trials:
        raise ConfigError("trial", f"must lie in [0, {cfg.trials})")
    if algorithm not in ALGORITHMS:
        raise ConfigError("algorithm", f"unknown algorithm {algorithm!r}")
    instance = trial_instance(cfg, m, trial, hypothesis)
    return run_algorithm(cfg, algorithm, instance, m, trial, trace=True)


def default_workers() -> int:
    return os.cpu_count() or 1
