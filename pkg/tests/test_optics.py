import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as sc

from landaupol.hopfield import CouplingSet, branch_frequencies
from landaupol.optics import (
    CavityGeometry,
    ConfigError,
    Constant,
    DrudeMetal,
    Layer,
    LayerStack,
    TransmissionMap,
    drude_metal,
    extract_peaks,
    plasma_frequency_sq,
    qw_permittivity,
    cavity_stack,
    transfer_matrix_transmittance,
    transmission_map,
    write_peaks_csv,
)
from landaupol.physics import gaas_sample

import oracles

S = gaas_sample()
NU0 = 0.925
FITTED = CouplingSet.normalized(NU0, 0.18, {1: 0.084, 3: 0.084})
ZERO = CouplingSet(NU0, 0.0, {1: 0.0, 3: 0.0})
GEOM = CavityGeometry(gaas_value_is_index=True)
NU = np.linspace(0.2, 1.6, 400)


# ---------------------------------------------------------------- permittivities


def test_zero_coupling_gives_background():
    eps = qw_permittivity(S, ZERO, 84.2e-6, np.linspace(0, 7, 5)[:, None], NU[None, :])
    assert np.all(eps == S.rel_permittivity)


def test_high_frequency_limit():
    eps = qw_permittivity(S, FITTED, 84.2e-6, 2.0, 100 * NU0)
    assert abs(eps - S.rel_permittivity) / S.rel_permittivity < 1e-3


def test_background_approached_as_inverse_square():
    dev = [abs(qw_permittivity(S, FITTED, 84.2e-6, 2.0, f * NU0) - S.rel_permittivity) for f in (300, 600)]
    assert dev[0] / dev[1] == pytest.approx(4.0, rel=0.01)


def test_plasma_frequency_value():
    wpl = math.sqrt(plasma_frequency_sq(0.18 * NU0, 6.98, 84.2e-6, 30e-9))
    assert wpl == pytest.approx(0.18 * 0.925 * math.sqrt(6.98 * 84.2e-6 / 30e-9), rel=1e-12)
    assert wpl == pytest.approx(23.3, abs=0.05)


def test_polarizations_coincide_at_zero_field():
    a = qw_permittivity(S, FITTED, 84.2e-6, 0.0, NU, "active")
    b = qw_permittivity(S, FITTED, 84.2e-6, 0.0, NU, "inactive")
    assert np.array_equal(a, b)
    a = qw_permittivity(S, FITTED, 84.2e-6, 2.0, NU, "active")
    b = qw_permittivity(S, FITTED, 84.2e-6, 2.0, NU, "inactive")
    assert not np.allclose(a, b)


def test_drude_examples():
    assert drude_metal(1e-300, 1.0, 1.0) == pytest.approx(1.0)
    eps = drude_metal(2180.0, 6.45, 1.0)
    assert abs(eps) > 1e5
    # low-frequency asymptote: Im eps ~ nu_pl^2 / (nu gamma)
    nu, gamma, wpl = 0.01, 6.45, 2180.0
    assert drude_metal(wpl, gamma, nu).imag == pytest.approx(wpl**2 / (nu * gamma), rel=1e-3)
    with pytest.raises(ConfigError):
        DrudeMetal(0.0, 1.0)


def test_layer_validation():
    with pytest.raises(ConfigError):
        Layer(0.0, Constant(1.0))
    with pytest.raises(ConfigError):
        LayerStack(())
    with pytest.raises(ConfigError):
        transfer_matrix_transmittance(LayerStack((Layer(1e-6, Constant(2.0)),), Constant(-1.0)), 1.0)


# ---------------------------------------------------------------- transfer matrix


def test_vacuum_layer_is_transparent():
    T, R = transfer_matrix_transmittance(LayerStack((Layer(5e-6, Constant(1.0)),)), NU)
    assert np.allclose(T, 1.0, atol=1e-14) and np.allclose(R, 0.0, atol=1e-14)


def test_half_wave_slab_is_transparent():
    n, nu = 2.0, 1.0
    d = sc.c / (nu * 1e12) / n / 2
    T, _ = transfer_matrix_transmittance(LayerStack((Layer(d, Constant(n * n)),)), nu)
    assert T == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.01, 6.0), st.floats(1e-6, 200e-6))
def test_single_slab_matches_airy(n, d):
    T, _ = transfer_matrix_transmittance(LayerStack((Layer(d, Constant(n * n)),)), NU)
    assert np.allclose(T, oracles.airy_slab(n, d, NU), atol=1e-12)


def test_thick_lossy_limit_matches_fresnel_at_average():
    # a quarter-wave slab gives the minimum Airy transmittance 4 n^2 / (n^2 + 1)^2
    n = 3.6
    d = sc.c / 1e12 / n / 4
    T, _ = transfer_matrix_transmittance(LayerStack((Layer(d, Constant(n * n)),)), 1.0)
    assert T == pytest.approx(4 * n * n / (n * n + 1) ** 2, rel=1e-12)


def random_stack(rng, lossy=False):
    layers = []
    for _ in range(rng.integers(1, 7)):
        eps = rng.uniform(1.0, 13.0)
        if lossy:
            eps = eps + 1j * rng.uniform(0.0, 3.0)
        layers.append(Layer(rng.uniform(0.1e-6, 60e-6), Constant(eps)))
    return LayerStack(tuple(layers))


def test_energy_conservation_lossless():
    rng = np.random.default_rng(11)
    for _ in range(200):
        T, R = transfer_matrix_transmittance(random_stack(rng), NU)
        assert np.max(np.abs(T + R - 1.0)) < 1e-10


def test_energy_bound_lossy():
    rng = np.random.default_rng(12)
    for _ in range(100):
        T, R = transfer_matrix_transmittance(random_stack(rng, lossy=True), NU)
        assert np.all(T + R <= 1.0 + 1e-10)


def test_reciprocity():
    rng = np.random.default_rng(13)
    for _ in range(50):
        st_ = random_stack(rng, lossy=True)
        T1, _ = transfer_matrix_transmittance(st_, NU)
        T2, _ = transfer_matrix_transmittance(st_.reversed(), NU)
        assert np.max(np.abs(T1 - T2)) < 1e-10


def split(stack, index):
    layers = list(stack.layers)
    lay = layers[index]
    half = Layer(lay.thickness / 2, lay.model)
    layers[index : index + 1] = [half, half]
    return LayerStack(tuple(layers), stack.ambient)


def test_subdivision_invariance():
    rng = np.random.default_rng(14)
    for _ in range(50):
        st_ = random_stack(rng, lossy=True)
        T1, _ = transfer_matrix_transmittance(st_, NU)
        T2, _ = transfer_matrix_transmittance(split(st_, int(rng.integers(len(st_.layers)))), NU)
        assert np.max(np.abs(T1 - T2)) < 1e-12


def test_s1_subdivision_invariance():
    st_ = cavity_stack(S, FITTED, GEOM)
    T1, _ = transfer_matrix_transmittance(st_, NU, 1.25)
    T2, _ = transfer_matrix_transmittance(split(split(st_, 1), 3), NU, 1.25)
    assert np.max(np.abs(T1 - T2)) < 1e-12


def test_broadcasting_matches_loop():
    st_ = cavity_stack(S, FITTED, GEOM)
    fields = np.array([0.5, 1.25, 3.0])
    grid, _ = transfer_matrix_transmittance(st_, NU[None, :], fields[:, None])
    for i, B in enumerate(fields):
        row, _ = transfer_matrix_transmittance(st_, NU, B)
        assert np.allclose(grid[i], row, rtol=0, atol=1e-15)


# ---------------------------------------------------------------- the gold-GaAs cavity


def test_passive_cavity_peak_at_configured_frequency():
    T, _ = transfer_matrix_transmittance(cavity_stack(S, ZERO, GEOM), NU, 1.0)
    fine = np.linspace(0.85, 1.0, 3001)
    Tf, _ = transfer_matrix_transmittance(cavity_stack(S, ZERO, GEOM), fine, 1.0)
    assert abs(fine[np.argmax(Tf)] - NU0) / NU0 < 0.01


def test_gaas_value_switch():
    assert CavityGeometry().gaas_permittivity == 3.6
    assert GEOM.gaas_permittivity == pytest.approx(12.96)


def test_zero_coupling_map_is_field_independent():
    tmap = transmission_map(cavity_stack(S, ZERO, GEOM), np.linspace(0.01, 7, 10), NU)
    assert np.allclose(tmap.values, tmap.values[0], atol=1e-15)
    peaks = extract_peaks(tmap)
    assert {round(p.freq, 6) for p in peaks} == {round(peaks[0].freq, 6)}


def test_inactive_equals_active_at_zero_field():
    a, _ = transfer_matrix_transmittance(cavity_stack(S, FITTED, GEOM, "active"), NU, 0.0)
    b, _ = transfer_matrix_transmittance(cavity_stack(S, FITTED, GEOM, "inactive"), NU, 0.0)
    assert np.max(np.abs(a - b)) < 1e-12


@pytest.fixture(scope="module")
def fitted_map():
    return transmission_map(cavity_stack(S, FITTED, GEOM), np.linspace(0.01, 7, 200), NU)


def test_map_shape_and_range(fitted_map):
    assert fitted_map.values.shape == (200, 400)
    assert np.all((fitted_map.values >= 0) & (fitted_map.values <= 1))


def test_up_split_at_1p25(fitted_map):
    col = fitted_map.column(1.25)
    band = (NU >= 0.8) & (NU <= 1.15)
    inner = np.flatnonzero(band)
    maxima = [i for i in inner if col[i] > col[i - 1] and col[i] > col[i + 1]]
    assert len(maxima) == 2


def test_three_peaks_at_1p25(fitted_map):
    peaks = [p for p in extract_peaks(fitted_map) if abs(p.B - fitted_map.field_axis[np.argmin(abs(fitted_map.field_axis - 1.25))]) < 1e-12]
    assert len([p for p in peaks if 0.3 <= p.freq <= 1.3]) == 3


def test_lp_ridge_at_7T(fitted_map):
    peaks = [p for p in extract_peaks(fitted_map) if p.B == fitted_map.field_axis[-1]]
    F = branch_frequencies(FITTED, S, [fitted_map.field_axis[-1]])[0]
    lp = F[0]
    assert min(abs(p.freq - lp) / lp for p in peaks) < 0.02


# ---------------------------------------------------------------- peak extraction


def lorentz(x, x0, w):
    return 1.0 / (1.0 + ((x - x0) / w) ** 2)


def test_single_lorentzian():
    x = np.linspace(0.2, 1.6, 400)
    tmap = TransmissionMap(np.array([1.0]), x, lorentz(x, 0.7777, 0.02)[None, :])
    peaks = extract_peaks(tmap)
    assert len(peaks) == 1
    assert abs(peaks[0].freq - 0.7777) < x[1] - x[0]


def test_two_separated_lorentzians():
    x = np.linspace(0.2, 1.6, 400)
    w = 0.01
    col = lorentz(x, 0.8, w) + lorentz(x, 0.8 + 5 * w, w)
    peaks = extract_peaks(TransmissionMap(np.array([1.0]), x, col[None, :]))
    assert len(peaks) == 2


def test_max_peaks_keeps_most_prominent():
    x = np.linspace(0.2, 1.6, 400)
    col = lorentz(x, 0.5, 0.01) + 0.3 * lorentz(x, 1.0, 0.01) + 0.6 * lorentz(x, 1.3, 0.01)
    peaks = extract_peaks(TransmissionMap(np.array([1.0]), x, col[None, :]), max_peaks=2)
    assert [round(p.freq, 1) for p in peaks] == [0.5, 1.3]


def test_flat_column_has_no_peaks():
    x = np.linspace(0.2, 1.6, 50)
    assert extract_peaks(TransmissionMap(np.array([1.0]), x, np.ones((1, 50)))) == []


def test_csv_writers(fitted_map, tmp_path):
    small = TransmissionMap(fitted_map.field_axis[:2], NU[:3], fitted_map.values[:2, :3])
    with open(tmp_path / "long.csv", "w") as fh:
        small.write_long_csv(fh, "# hi\n")
    lines = (tmp_path / "long.csv").read_text().splitlines()
    assert lines[:2] == ["# hi", "B_T,freq_THz,T"] and len(lines) == 2 + 6
    with open(tmp_path / "matrix.csv", "w") as fh:
        small.write_matrix_csv(fh)
    rows = (tmp_path / "matrix.csv").read_text().splitlines()
    assert len(rows) == 3 and len(rows[0].split(",")) == 4
    with open(tmp_path / "peaks.csv", "w") as fh:
        write_peaks_csv(extract_peaks(small), fh)
    assert (tmp_path / "peaks.csv").read_text().startswith("B_T,freq_THz,height")
