"""Sparse signals, random projections and noisy per-node observations.

Every node ``l`` observes ``y_l = A_l Psi beta + v_l`` (or ``v_l`` alone when
the signal is absent).  All randomness flows from explicit
``numpy.random.Generator`` objects; :func:`substream` derives independent,
order-free generators from a master seed and an integer key so that any
trial can be regenerated on its own.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import InvalidParameterError

H0 = "H0"
H1 = "H1"

UNIT = "unit"
GAUSSIAN = "gaussian"

# substream kinds
_SUPPORT, _AMPLITUDE, _FUSION, _MATRIX, _NOISE = range(5)


@dataclass(frozen=True)
class SupportSet:
    """Sorted set of coefficient indices in ``[0, n)``."""

    indices: tuple
    n: int

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise InvalidParameterError(f"duplicate indices in support: {idx}")
        if idx and (idx[0] < 0 or idx[-1] >= self.n):
            raise InvalidParameterError(f"support indices out of range [0, {self.n})")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def empty(cls, n):
        return cls((), n)

    @classmethod
    def from_binary(cls, bits):
        bits = np.asarray(bits)
        return cls(tuple(np.flatnonzero(bits)), bits.size)

    def to_binary(self):
        bits = np.zeros(self.n, dtype=np.int8)
        bits[list(self.indices)] = 1
        return bits

    def union(self, other: Iterable[int]) -> "SupportSet":
        return SupportSet(tuple(set(self.indices) | set(int(i) for i in other)), self.n)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return int(i) in self.indices


@dataclass(frozen=True)
class SparseSignal:
    coeffs: np.ndarray
    support: SupportSet
    basis: Optional[np.ndarray] = None

    @property
    def s(self) -> np.ndarray:
        """The signal in the measurement domain, ``Psi @ beta``."""
        if self.basis is None:
            return self.coeffs
        return self.basis @ self.coeffs

    @property
    def power(self) -> float:
        return float(self.s @ self.s)


@dataclass
class ProblemInstance:
    """One Monte Carlo draw: a signal seen by ``L`` nodes."""

    signal: SparseSignal
    matrices: list
    observations: list
    noise_variance: float
    hypothesis: str = H1
    seed: int = -1
    shared_seed: int = 0
    _dictionaries: Optional[list] = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.matrices)

    @property
    def n(self) -> int:
        return self.signal.coeffs.size

    @property
    def m(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def k(self) -> int:
        return len(self.signal.support)

    @property
    def true_support(self) -> SupportSet:
        if self.hypothesis == H0:
            return SupportSet.empty(self.n)
        return self.signal.support

    @property
    def dictionaries(self) -> list:
        """Per-node ``Theta_l = A_l Psi``."""
        if self._dictionaries is None:
            basis = self.signal.basis
            self._dictionaries = [a if basis is None else a @ basis for a in self.matrices]
        return self._dictionaries


def substream(seed, *key) -> np.random.Generator:
    """Generator for ``key`` under master ``seed``; independent of call order."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def gen_support(n, k, rng) -> SupportSet:
    if not 0 < k <= n:
        raise InvalidParameterError(f"need 0 < k <= n, got k={k}, n={n}")
    return SupportSet(tuple(rng.choice(n, size=k, replace=False)), n)


def gen_signal(support: SupportSet, amplitude_scheme=UNIT, target_power=None, rng=None,
               basis=None) -> SparseSignal:
    """Draw nonzero coefficients on ``support`` and rescale to ``target_power``.

    ``target_power`` defaults to ``K`` so unit-magnitude coefficients are left
    untouched when ``basis`` is the identity.
    """
    k = len(support)
    if target_power is None:
        target_power = float(k)
    if target_power <= 0:
        raise InvalidParameterError("target_power must be positive")
    if k == 0:
        raise InvalidParameterError("cannot place positive power on an empty support")
    rng = np.random.default_rng() if rng is None else rng
    if amplitude_scheme == UNIT:
        amps = rng.choice([-1.0, 1.0], size=k)
    elif amplitude_scheme == GAUSSIAN:
        amps = rng.standard_normal(k)
        # keep every coefficient strictly nonzero
        amps[amps == 0.0] = np.finfo(float).tiny
    else:
        raise InvalidParameterError(f"unknown amplitude scheme {amplitude_scheme!r}")

    coeffs = np.zeros(support.n)
    coeffs[list(support.indices)] = amps
    if basis is not None:
        basis = np.asarray(basis, dtype=float)
        if basis.shape != (support.n, support.n):
            raise InvalidParameterError(f"basis must be {support.n}x{support.n}")
        cond = np.linalg.cond(basis)
        if cond > 1e8:
            warnings.warn(f"sparsifying basis is poorly conditioned (cond={cond:.3g})")
    s = coeffs if basis is None else basis @ coeffs
    coeffs *= np.sqrt(target_power / (s @ s))
    return SparseSignal(coeffs, support, basis)


def gen_measurement_matrix(m, n, rng) -> np.ndarray:
    """``m x n`` matrix with iid N(0, 1/n) entries."""
    if not 0 < m < n:
        raise InvalidParameterError(f"need 0 < m < n, got m={m}, n={n}")
    return rng.standard_normal((m, n)) / np.sqrt(n)


def measure(signal: SparseSignal, matrix, noise_variance, hypothesis=H1, rng=None) -> np.ndarray:
    if noise_variance < 0:
        raise InvalidParameterError("noise_variance must be nonnegative")
    matrix = np.asarray(matrix)
    if matrix.shape[1] != signal.coeffs.size:
        raise InvalidParameterError(
            f"matrix has {matrix.shape[1]} columns, signal has length {signal.coeffs.size}")
    m = matrix.shape[0]
    if noise_variance > 0:
        rng = np.random.default_rng() if rng is None else rng
        noise = np.sqrt(noise_variance) * rng.standard_normal(m)
    else:
        noise = np.zeros(m)
    if hypothesis == H0:
        return noise
    return matrix @ signal.s + noise


def snr_to_noise_variance(snr_db, signal_power, n) -> float:
    """Noise variance giving ``||s||^2 / (n sigma^2)`` equal to ``snr_db``."""
    if signal_power <= 0:
        raise InvalidParameterError("signal_power must be positive")
    return signal_power / (n * 10.0 ** (snr_db / 10.0))


def make_instance(n, m, k, n_nodes, snr_db, hypothesis=H1, seed=0, key=(),
                  amplitude_scheme=UNIT, basis=None) -> ProblemInstance:
    """Generate a full instance from ``(seed, key)``.

    The support, coefficients, each node's matrix and each node's noise come
    from separate substreams, so e.g. node 3's matrix does not depend on
    ``n_nodes``.
    """
    if hypothesis not in (H0, H1):
        raise InvalidParameterError(f"hypothesis must be H0 or H1, got {hypothesis!r}")
    if n_nodes < 1:
        raise InvalidParameterError("need at least one node")
    key = tuple(key)
    support = gen_support(n, k, substream(seed, *key, _SUPPORT))
    signal = gen_signal(support, amplitude_scheme, float(k), substream(seed, *key, _AMPLITUDE), basis)
    sigma2 = snr_to_noise_variance(snr_db, signal.power, n)
    matrices = [gen_measurement_matrix(m, n, substream(seed, *key, _MATRIX, l)) for l in range(n_nodes)]
    obs = [measure(signal, a, sigma2, hypothesis, substream(seed, *key, _NOISE, l))
           for l, a in enumerate(matrices)]
    shared = int(substream(seed, *key, _FUSION).integers(2**63 - 1))
    return ProblemInstance(signal, matrices, obs, sigma2, hypothesis, int(seed), shared)


def replicate_node(instance: ProblemInstance, n_nodes: int) -> ProblemInstance:
    """Copy node 0's matrix and observation to ``n_nodes`` nodes."""
    return ProblemInstance(
        instance.signal,
        [instance.matrices[0]] * n_nodes,
        [instance.observations[0]] * n_nodes,
        instance.noise_variance,
        instance.hypothesis,
        instance.seed,
        instance.shared_seed,
    )


# -- debug text format ------------------------------------------------------

def save_instance(instance: ProblemInstance, path) -> None:
    """Write ``instance`` as plain text.

    Layout: a header line ``N M L K sigma2 seed hypothesis``, one line of
    ``N`` coefficients, then for each node ``M`` row-major matrix lines
    followed by one line holding ``y_l``.
    """
    with open(path, "w") as fh:
        fh.write(f"{instance.n} {instance.m} {instance.n_nodes} {instance.k} "
                 f"{instance.noise_variance!r} {instance.seed} {instance.hypothesis}\n")
        np.savetxt(fh, instance.signal.coeffs[None, :], fmt="%.17g")
        for a, y in zip(instance.matrices, instance.observations):
            np.savetxt(fh, a, fmt="%.17g")
            np.savetxt(fh, y[None, :], fmt="%.17g")


def load_instance(path) -> ProblemInstance:
    with open(path) as fh:
        header = fh.readline().split()
        n, m, n_nodes, _k = (int(v) for v in header[:4])
        sigma2, seed, hyp = float(header[4]), int(header[5]), header[6]
        rows = [np.array(line.split(), dtype=float) for line in fh if line.strip()]
    coeffs = rows[0]
    support = SupportSet(tuple(np.flatnonzero(coeffs)), n)
    matrices, obs = [], []
    pos = 1
    for _ in range(n_nodes):
        matrices.append(np.vstack(rows[pos:pos + m]))
        obs.append(rows[pos + m])
        pos += m + 1
    return ProblemInstance(SparseSignal(coeffs, support), matrices, obs, sigma2, hyp, seed)
