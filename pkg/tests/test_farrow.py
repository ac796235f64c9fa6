"""Farrow resampler core: branch filtering, Horner combination, serialization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farrowsync.design import DesignSpec, design_bank, measure_error
from farrowsync.estimation import OffsetParams
from farrowsync.farrow import (
    CoefficientBank,
    bank_from_text,
    bank_to_text,
    compensate_complex,
    compute_subfilter_outputs,
    delay_out_of_range,
    delay_sequence,
    farrow_output,
    load_bank,
    save_bank,
)


def _tiny_bank():
    # Order-2 first-degree bank, small enough to verify by hand.
    return CoefficientBank(np.array([[0.0, 1.0, 0.0], [0.5, 0.0, -0.5]]))


@pytest.fixture(scope="module")
def canonical_bank():
    return design_bank(DesignSpec(degree=4, order=36))


def test_hand_computed_branch_outputs_and_combination():
    bank = _tiny_bank()
    u = compute_subfilter_outputs(np.array([1.0, 2.0, 4.0, 8.0]), bank)
    np.testing.assert_array_equal(u.u[0], [2.0, 4.0])
    np.testing.assert_array_equal(u.u[1], [1.5, 3.0])
    y = farrow_output(u, OffsetParams(delta=0.1, epsilon=-0.05))
    np.testing.assert_allclose(y, [2.0 - 0.05 * 1.5, 4.0 + 0.05 * 3.0], rtol=0, atol=1e-15)


def test_zero_delay_output_is_branch_zero_bitwise(canonical_bank):
    rng = np.random.default_rng(0)
    x1 = rng.standard_normal(200)
    u = compute_subfilter_outputs(x1, canonical_bank)
    y = farrow_output(u, OffsetParams())
    np.testing.assert_array_equal(y, u.u[0])
    # Branch zero is the pure bulk delay.
    gd = canonical_bank.group_delay
    np.testing.assert_array_equal(u.u[0], x1[gd : gd + u.n_samples])


def test_horner_matches_direct_polynomial(canonical_bank):
    rng = np.random.default_rng(1)
    x1 = rng.standard_normal(150)
    u = compute_subfilter_outputs(x1, canonical_bank)
    params = OffsetParams(delta=0.0, epsilon=0.31)
    direct = sum(0.31**k * u.u[k] for k in range(u.degree + 1))
    y = farrow_output(u, params)
    np.testing.assert_allclose(y, direct, rtol=1e-13)


def test_delay_fidelity_within_measured_error(canonical_bank):
    delta_c = measure_error(canonical_bank).max_error
    gd = canonical_bank.group_delay
    for omega, d in [(0.8 * np.pi, 0.37), (0.5 * np.pi, -0.5), (0.9 * np.pi, 0.11)]:
        t = np.arange(300.0)
        x1 = np.cos(omega * t + 0.4)
        u = compute_subfilter_outputs(x1, canonical_bank)
        y = farrow_output(u, OffsetParams(delta=0.0, epsilon=d))
        want = np.cos(omega * (np.arange(u.n_samples) + gd - d) + 0.4)
        assert np.max(np.abs(y - want)) <= 2.0 * delta_c


def test_output_is_linear_in_the_input(canonical_bank):
    rng = np.random.default_rng(2)
    xa = rng.standard_normal(120)
    xb = rng.standard_normal(120)
    params = OffsetParams(delta=2e-4, epsilon=0.2)

    def run(x):
        return farrow_output(compute_subfilter_outputs(x, canonical_bank), params)

    np.testing.assert_allclose(run(1.5 * xa - 0.25 * xb), 1.5 * run(xa) - 0.25 * run(xb), rtol=1e-12)


def test_window_origin_offset():
    bank = _tiny_bank()
    u = compute_subfilter_outputs(np.arange(8.0), bank)
    shifted = farrow_output(u, OffsetParams(delta=0.01, epsilon=0.0), n0=5)
    d = (np.arange(u.n_samples) + 5) * 0.01
    np.testing.assert_allclose(shifted, u.u[0] + d * u.u[1], rtol=0, atol=1e-15)
    np.testing.assert_array_equal(delay_sequence(OffsetParams(0.01, 0.0), u.n_samples, n0=5), d)


def test_complex_compensation_is_componentwise(canonical_bank):
    rng = np.random.default_rng(3)
    z = rng.standard_normal(100) + 1j * rng.standard_normal(100)
    params = OffsetParams(delta=1e-4, epsilon=-0.1)
    y = compensate_complex(z, canonical_bank, params)
    y_re = farrow_output(compute_subfilter_outputs(z.real, canonical_bank), params)
    y_im = farrow_output(compute_subfilter_outputs(np.ascontiguousarray(z.imag), canonical_bank), params)
    np.testing.assert_array_equal(y, y_re + 1j * y_im)


def test_subfilter_outputs_reject_complex_and_short_input(canonical_bank):
    with pytest.raises(TypeError):
        compute_subfilter_outputs(np.zeros(100, complex), canonical_bank)
    with pytest.raises(ValueError):
        compute_subfilter_outputs(np.zeros(canonical_bank.order), canonical_bank)


def test_bank_validation():
    with pytest.raises(ValueError, match="even"):
        CoefficientBank(np.zeros((2, 4)))
    with pytest.raises(ValueError, match="unit pulse"):
        CoefficientBank(np.ones((2, 3)))
    with pytest.raises(ValueError, match="finite"):
        CoefficientBank(np.array([[0.0, 1.0, 0.0], [np.inf, 0.0, 0.0]]))
    with pytest.raises(ValueError):
        CoefficientBank(np.array([[0.0, 1.0, 0.0]]))  # a single row is not a bank


def test_truncation(canonical_bank):
    low = canonical_bank.truncated(1)
    assert low.degree == 1
    np.testing.assert_array_equal(low.taps, canonical_bank.taps[:2])
    with pytest.raises(ValueError):
        canonical_bank.truncated(0)
    with pytest.raises(ValueError):
        canonical_bank.truncated(5)


def test_delay_range_flag_checks_window_endpoints():
    assert delay_out_of_range(OffsetParams(450e-6, 0.05), 1024)
    assert not delay_out_of_range(OffsetParams(450e-6, 0.039), 1024)
    assert delay_out_of_range(OffsetParams(-450e-6, -0.05), 1024)
    assert not delay_out_of_range(OffsetParams(0.0, 0.2), 0)
    assert delay_out_of_range(OffsetParams(-1e-3, 0.0), 100, n0=-2000)


def test_serialization_roundtrip_is_exact(canonical_bank, tmp_path):
    again = bank_from_text(bank_to_text(canonical_bank))
    np.testing.assert_array_equal(again.taps, canonical_bank.taps)
    path = tmp_path / "bank.txt"
    save_bank(canonical_bank, path)
    np.testing.assert_array_equal(load_bank(path).taps, canonical_bank.taps)


def test_serialization_rejects_malformed_text():
    good = bank_to_text(_tiny_bank())
    with pytest.raises(ValueError, match="empty"):
        bank_from_text("")
    with pytest.raises(ValueError, match="header"):
        bank_from_text("1 2 3\n0 1 0\n")
    with pytest.raises(ValueError, match="rows"):
        bank_from_text(good.splitlines()[0] + "\n0 1 0\n")
    with pytest.raises(ValueError, match="taps"):
        bank_from_text("1 2\n0 1 0\n0.5 0\n")


@settings(max_examples=25, deadline=None)
@given(
    delta=st.floats(-4e-4, 4e-4),
    epsilon=st.floats(-0.45, 0.45),
    seed=st.integers(0, 2**32 - 1),
)
def test_combination_matches_direct_sum_for_any_delay_law(delta, epsilon, seed):
    bank = _tiny_bank()
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(40)
    u = compute_subfilter_outputs(x1, bank)
    params = OffsetParams(delta, epsilon)
    d = delay_sequence(params, u.n_samples)
    direct = u.u[0] + d * u.u[1]
    np.testing.assert_allclose(farrow_output(u, params), direct, rtol=0, atol=1e-12)
