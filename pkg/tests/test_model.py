import numpy as np
import pytest

from dcomp.errors import InvalidParameterError
from dcomp.model import (
    GAUSSIAN,
    H0,
    H1,
    UNIT,
    SparseSignal,
    SupportSet,
    gen_measurement_matrix,
    gen_signal,
    gen_support,
    load_instance,
    make_instance,
    measure,
    save_instance,
    snr_to_noise_variance,
)


def test_full_support_forced(rng):
    assert gen_support(4, 4, rng).indices == (0, 1, 2, 3)


def test_support_deterministic():
    a = gen_support(256, 10, np.random.default_rng(7))
    b = gen_support(256, 10, np.random.default_rng(7))
    assert a == b and len(a) == 10


@pytest.mark.parametrize("k", [0, 5])
def test_support_bad_k(rng, k):
    with pytest.raises(InvalidParameterError):
        gen_support(4, k, rng)


def test_support_uniform_frequencies():
    rng = np.random.default_rng(2024)
    draws = 10_000
    counts = np.zeros(256)
    for _ in range(draws):
        counts[list(gen_support(256, 10, rng))] += 1
    p = 10 / 256
    sigma = np.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) < 5 * sigma)


def test_support_set_rejects_bad_indices():
    with pytest.raises(InvalidParameterError):
        SupportSet((1, 1), 4)
    with pytest.raises(InvalidParameterError):
        SupportSet((4,), 4)


def test_binary_round_trip():
    s = SupportSet((9, 2, 5), 12)
    bits = s.to_binary()
    assert bits.sum() == 3 and bits[[2, 5, 9]].all()
    assert SupportSet.from_binary(bits) == s


def test_signal_single_unit(rng):
    sig = gen_signal(SupportSet((3,), 8), UNIT, 1.0, rng)
    assert abs(sig.coeffs[3]) == 1.0
    assert np.count_nonzero(sig.coeffs) == 1


def test_signal_unit_equal_split(rng):
    sig = gen_signal(gen_support(256, 10, rng), UNIT, 10.0, rng)
    nz = sig.coeffs[list(sig.support)]
    np.testing.assert_allclose(np.abs(nz), 1.0, rtol=0, atol=1e-15)


def test_signal_gaussian_rescaled(rng):
    sig = gen_signal(gen_support(256, 10, rng), GAUSSIAN, 10.0, rng)
    assert abs(sig.power - 10.0) < 1e-12
    assert set(np.flatnonzero(sig.coeffs)) == set(sig.support)


def test_signal_with_basis(rng):
    basis = np.linalg.qr(rng.standard_normal((16, 16)))[0]
    sig = gen_signal(SupportSet((1, 4), 16), GAUSSIAN, 3.0, rng, basis=basis)
    assert abs(sig.power - 3.0) < 1e-12
    np.testing.assert_allclose(sig.s, basis @ sig.coeffs)


def test_signal_errors(rng):
    with pytest.raises(InvalidParameterError):
        gen_signal(SupportSet.empty(8), UNIT, 1.0, rng)
    with pytest.raises(InvalidParameterError):
        gen_signal(SupportSet((1,), 8), UNIT, 0.0, rng)


def test_matrix_shape_and_determinism():
    a = gen_measurement_matrix(26, 256, np.random.default_rng(3))
    b = gen_measurement_matrix(26, 256, np.random.default_rng(3))
    assert a.shape == (26, 256)
    assert np.array_equal(a, b)


def test_matrix_variance():
    a = gen_measurement_matrix(255, 256, np.random.default_rng(11))
    assert abs(a.var() - 1 / 256) < 0.1 / 256


def test_matrix_requires_compression(rng):
    with pytest.raises(InvalidParameterError):
        gen_measurement_matrix(256, 256, rng)


def test_measure_noiseless_column(rng):
    a = gen_measurement_matrix(20, 50, rng)
    coeffs = np.zeros(50)
    coeffs[3] = 1.0
    sig = SparseSignal(coeffs, SupportSet((3,), 50))
    np.testing.assert_array_equal(measure(sig, a, 0.0, H1, rng), a[:, 3])
    np.testing.assert_array_equal(measure(sig, a, 0.0, H0, rng), np.zeros(20))


def test_measure_h0_noise_variance():
    rng = np.random.default_rng(5)
    sig = SparseSignal(np.eye(1, 2000, 0).ravel(), SupportSet((0,), 2000))
    a = np.zeros((1000, 2000))
    y = measure(sig, a, 1.0, H0, rng)
    assert abs(y.var() - 1.0) < 0.1


def test_measure_dimension_mismatch(rng):
    sig = SparseSignal(np.ones(5), SupportSet(range(5), 5))
    with pytest.raises(InvalidParameterError):
        measure(sig, np.zeros((3, 6)), 0.0, H1, rng)


@pytest.mark.parametrize(
    "snr_db, power, n, expected",
    [(0.0, 256.0, 256, 1.0), (17.3227, 10.0, 256, 0.0007235857987055707), (10.0, 100.0, 10, 1.0)],
)
def test_snr_to_noise_variance(snr_db, power, n, expected):
    assert snr_to_noise_variance(snr_db, power, n) == pytest.approx(expected, rel=1e-12)


def test_instance_noise_consistent_with_variance():
    inst = make_instance(256, 64, 10, 10, 17.3227, H1, seed=9)
    resid = np.concatenate([y - a @ inst.signal.s for a, y in zip(inst.matrices, inst.observations)])
    dof = resid.size
    chi2 = (resid @ resid) / inst.noise_variance
    assert abs(chi2 - dof) < 5 * np.sqrt(2 * dof)


def test_instance_reproducible_and_h0():
    a = make_instance(64, 20, 4, 3, 20.0, H0, seed=1, key=(2, 3))
    b = make_instance(64, 20, 4, 3, 20.0, H0, seed=1, key=(2, 3))
    for x, y in zip(a.observations, b.observations):
        assert np.array_equal(x, y)
    assert len(a.true_support) == 0 and len(a.signal.support) == 4
    c = make_instance(64, 20, 4, 3, 20.0, H0, seed=2, key=(2, 3))
    assert not np.array_equal(a.matrices[0], c.matrices[0])


def test_node_streams_independent_of_network_size():
    small = make_instance(64, 20, 4, 2, 20.0, seed=4)
    large = make_instance(64, 20, 4, 5, 20.0, seed=4)
    assert np.array_equal(small.matrices[1], large.matrices[1])
    assert np.array_equal(small.observations[1], large.observations[1])


def test_text_round_trip(tmp_path):
    inst = make_instance(32, 12, 3, 2, 15.0, H1, seed=8)
    path = tmp_path / "inst.txt"
    save_instance(inst, path)
    back = load_instance(path)
    assert back.signal.support == inst.signal.support
    assert back.noise_variance == inst.noise_variance
    for a, b in zip(inst.matrices, back.matrices):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(inst.observations, back.observations):
        np.testing.assert_array_equal(a, b)
