import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landaupol.physics import (
    DomainError,
    NoSolutionError,
    SampleParams,
    cyclotron_frequency,
    magnetoplasmon_frequency,
    mobility_lifetime,
    mode_momentum,
    gaas_sample,
    plasmon_frequency,
    slot_momentum,
    zero_detuning_field,
)

import oracles

S = gaas_sample()
# scipy ships CODATA 2022, the package CODATA 2018; they differ at ~1e-9
CODATA_REL = 1e-8
K1 = math.pi / 4e-6
K3 = 3 * math.pi / 4e-6


def test_plasmon_zero_k():
    assert plasmon_frequency(0.0, S) == 0.0


@pytest.mark.parametrize("k, expected", [(K1, 0.4635), (K3, 0.8028)])
def test_plasmon_reference_values(k, expected):
    assert plasmon_frequency(k, S) == pytest.approx(expected, abs=5e-5)
    assert plasmon_frequency(k, S) == pytest.approx(
        oracles.plasmon_thz(k, 3.6e15, 0.076, 6.98), rel=CODATA_REL
    )


def test_plasmon_sqrt_scaling():
    assert plasmon_frequency(K3, S) == pytest.approx(math.sqrt(3) * plasmon_frequency(K1, S), rel=1e-12)


def test_cyclotron_values():
    assert cyclotron_frequency(0.0, S) == 0.0
    assert cyclotron_frequency(2.51, S) == pytest.approx(0.9245, abs=5e-5)
    assert cyclotron_frequency(1.255, S) == pytest.approx(0.4622, abs=5e-5)
    assert cyclotron_frequency(2.51, S) == pytest.approx(oracles.cyclotron_thz(2.51, 0.076), rel=CODATA_REL)


def test_magnetoplasmon_limits():
    assert magnetoplasmon_frequency(K1, 0.0, S) == pytest.approx(plasmon_frequency(K1, S))
    assert magnetoplasmon_frequency(0.0, 3.0, S) == pytest.approx(cyclotron_frequency(3.0, S))
    assert magnetoplasmon_frequency(K1, 2.18, S) == pytest.approx(0.925, rel=5e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1e7), st.floats(0, 20))
def test_magnetoplasmon_is_quadrature_sum(k, B):
    nu = magnetoplasmon_frequency(k, B, S)
    assert nu * nu == pytest.approx(plasmon_frequency(k, S) ** 2 + cyclotron_frequency(B, S) ** 2, rel=1e-12, abs=1e-300)


def test_negative_arguments_rejected():
    with pytest.raises(DomainError):
        plasmon_frequency(-1.0, S)
    with pytest.raises(DomainError):
        cyclotron_frequency(-0.1, S)


def test_slot_momentum():
    assert slot_momentum(1, 4e-6) == pytest.approx(7.854e5, rel=1e-4)
    assert slot_momentum(3, 4e-6) == pytest.approx(2.356e6, rel=1e-4)
    assert mode_momentum(3, S) == slot_momentum(3, 4e-6)
    for bad in (2, 0, -1, 1.5, True):
        with pytest.raises(DomainError):
            slot_momentum(bad, 4e-6)
    with pytest.raises(DomainError):
        slot_momentum(1, 0.0)


@pytest.mark.parametrize("k, expected, tol", [(0.0, 2.51, 0.01), (K1, 2.17, 0.02), (K3, 1.25, 0.01)])
def test_zero_detuning_fields(k, expected, tol):
    B = zero_detuning_field(0.925, k, S)
    assert abs(B - expected) <= tol
    assert B == pytest.approx(oracles.zero_field_T(0.925, k, 3.6e15, 0.076, 6.98), rel=CODATA_REL)


def test_zero_detuning_round_trip():
    B = zero_detuning_field(0.925, K3, S)
    assert magnetoplasmon_frequency(K3, B, S) == pytest.approx(0.925, rel=1e-12)


def test_zero_detuning_no_solution_reports_minimum():
    with pytest.raises(NoSolutionError) as info:
        zero_detuning_field(0.3, K1, S)
    assert info.value.min_frequency == pytest.approx(plasmon_frequency(K1, S))


def test_zero_detuning_decreases_with_k():
    k5 = mode_momentum(5, S)
    target = 1.2  # above nu_p(5 pi / d)
    fields = [zero_detuning_field(target, k, S) for k in (0.0, K1, K3, k5)]
    assert all(a > b for a, b in zip(fields, fields[1:]))


def test_sample_validation_and_lifetimes():
    with pytest.raises(DomainError):
        gaas_sample(slot_width=-4e-6)
    with pytest.raises(DomainError):
        SampleParams(3.6e15, 0.076, 6.98, 4e-6, mp_lifetimes={2: 1e-12})
    s = gaas_sample(mp_lifetimes={3: 2e-12})
    assert s.mp_lifetime(3) == 2e-12
    assert s.mp_lifetime(1) == s.default_mp_lifetime
    assert S.cr_lifetime == pytest.approx(mobility_lifetime(120.0, 0.076))
    assert S.cr_lifetime == pytest.approx(51.9e-12, rel=1e-3)
