"""Element circuit: impedance, reflection, and phase inversion."""

import numpy as np
import pytest

from squintsim import (CircuitParams, element_impedance, element_reflection,
                       phase_to_capacitance, reflection_phase_interval)
from squintsim.circuit import wrap_phase

F_REF = 2.5e9

# Constants evaluated independently with 50-digit arithmetic.
Z_1PF_2P5GHZ = 8.5452388218882456 + 153.74615543535321j
PHASE_AT_CMIN = 2.8393438062823499
PHASE_AT_CMAX = -2.9977073678492217
MAG_AT_CMIN = 0.99889812666385701
MAG_AT_CMAX = 0.98497766600512415
SPAN_DEG = 334.43839707962081


def test_params_defaults(params):
    assert params.l_bottom == 2.5e-9
    assert params.l_top == 0.7e-9
    assert params.r_loss == 1.0
    assert params.c_min == 0.47e-12
    assert params.c_max == 2.35e-12
    assert params.z0 == pytest.approx(376.730313668, abs=0)


@pytest.mark.parametrize("kwargs", [
    {"l_bottom": 0.0},
    {"l_top": -1e-9},
    {"r_loss": -0.5},
    {"z0": 0.0},
    {"c_min": 0.0},
    {"c_min": 2e-12, "c_max": 1e-12},
])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        CircuitParams(**kwargs)


def test_impedance_pinned_value(params):
    z = element_impedance(1e-12, F_REF, params)
    assert abs(z - Z_1PF_2P5GHZ) <= 1e-12 * abs(Z_1PF_2P5GHZ)


def test_impedance_top_branch_resonance(params):
    # at f = 1/(2 pi sqrt(l_top c)) the series branch collapses to r_loss
    c = 1.2e-12
    f = 1.0 / (2.0 * np.pi * np.sqrt(params.l_top * c))
    z = element_impedance(c, f, params)
    zl1 = 1j * 2.0 * np.pi * f * params.l_bottom
    expected = zl1 * params.r_loss / (zl1 + params.r_loss)
    assert abs(z - expected) <= 1e-12 * abs(expected)


def test_impedance_lossless_is_purely_imaginary():
    p = CircuitParams(r_loss=0.0)
    for c in (0.5e-12, 1e-12, 2e-12):
        z = element_impedance(c, F_REF, p)
        assert z.real == pytest.approx(0.0, abs=1e-9)


def test_impedance_positive_real_part(params, rng):
    caps = rng.uniform(params.c_min, params.c_max, 200)
    freqs = rng.uniform(1e9, 6e9, 200)
    z = element_impedance(caps, freqs, params)
    assert np.all(z.real >= 0)


def test_impedance_domain_errors(params):
    with pytest.raises(ValueError):
        element_impedance(0.0, F_REF, params)
    with pytest.raises(ValueError):
        element_impedance(1e-12, 0.0, params)
    with pytest.raises(ValueError):
        element_impedance(np.array([1e-12, -1e-12]), F_REF, params)


def test_impedance_broadcasts(params):
    caps = np.array([0.5e-12, 1e-12, 2e-12])
    z = element_impedance(caps, F_REF, params)
    assert z.shape == (3,)
    for c, zi in zip(caps, z):
        assert zi == element_impedance(c, F_REF, params)


def test_reflection_pinned_endpoints(params):
    lo = element_reflection(params.c_min, F_REF, params)
    hi = element_reflection(params.c_max, F_REF, params)
    assert np.angle(lo.gamma) == pytest.approx(PHASE_AT_CMIN, abs=1e-12)
    assert np.angle(hi.gamma) == pytest.approx(PHASE_AT_CMAX, abs=1e-12)
    assert abs(lo.gamma) == pytest.approx(MAG_AT_CMIN, abs=1e-12)
    assert abs(hi.gamma) == pytest.approx(MAG_AT_CMAX, abs=1e-12)
    assert lo.frequency == F_REF
    assert lo.capacitance == params.c_min


def test_reflection_passive_on_grid(params):
    caps = np.linspace(params.c_min, params.c_max, 100)
    freqs = np.linspace(1e9, 6e9, 100)
    gamma = element_reflection(caps[None, :], freqs[:, None], params).gamma
    assert gamma.shape == (100, 100)
    assert np.all(np.abs(gamma) <= 1.0 + 1e-12)


def test_reflection_lossless_unit_magnitude():
    p = CircuitParams(r_loss=0.0)
    caps = np.linspace(p.c_min, p.c_max, 100)
    freqs = np.linspace(1e9, 6e9, 100)
    gamma = element_reflection(caps[None, :], freqs[:, None], p).gamma
    assert np.max(np.abs(np.abs(gamma) - 1.0)) < 1e-12


def test_reflection_phase_monotone_in_capacitance(params):
    caps = np.linspace(params.c_min, params.c_max, 10_000)
    phase = np.unwrap(np.angle(element_reflection(caps, F_REF, params).gamma))
    assert np.all(np.diff(phase) < 0)


def test_phase_interval_span(params):
    lo, hi = reflection_phase_interval(F_REF, params)
    assert lo == pytest.approx(PHASE_AT_CMIN, abs=1e-12)
    assert hi == pytest.approx(PHASE_AT_CMAX, abs=1e-12)
    span = np.degrees(lo - hi)
    assert span == pytest.approx(SPAN_DEG, abs=1e-6)
    assert span > 330.0


def test_phase_round_trip(params, rng):
    lo, hi = reflection_phase_interval(F_REF, params)
    targets = rng.uniform(hi + 1e-9, lo - 1e-9, 1000)
    sol = phase_to_capacitance(targets, F_REF, params)
    assert not np.any(sol.clamped)
    err = np.abs(wrap_phase(sol.achieved_phase - targets))
    assert np.max(err) < 1e-6
    assert np.all(sol.capacitance >= params.c_min)
    assert np.all(sol.capacitance <= params.c_max)


def test_phase_round_trip_scalar(params):
    sol = phase_to_capacitance(0.5, F_REF, params)
    assert isinstance(sol.capacitance, float)
    assert not sol.clamped
    assert sol.achieved_phase == pytest.approx(0.5, abs=1e-6)
    gamma = element_reflection(sol.capacitance, F_REF, params).gamma
    assert np.angle(gamma) == pytest.approx(0.5, abs=1e-6)


def test_phase_clamps_to_nearest_boundary(params):
    lo, hi = reflection_phase_interval(F_REF, params)
    # just above the top of the achievable arc: clamp to c_min
    above = phase_to_capacitance(lo + 0.05, F_REF, params)
    assert above.clamped
    assert above.capacitance == params.c_min
    assert above.achieved_phase == pytest.approx(lo, abs=1e-12)
    # just below the bottom (wrapped): clamp to c_max
    below = phase_to_capacitance(wrap_phase(hi - 0.05), F_REF, params)
    assert below.clamped
    assert below.capacitance == params.c_max
    assert below.achieved_phase == pytest.approx(hi, abs=1e-12)


def test_phase_vectorized_matches_scalar(params, rng):
    targets = rng.uniform(-np.pi, np.pi, 16)
    batch = phase_to_capacitance(targets, F_REF, params)
    for i, t in enumerate(targets):
        single = phase_to_capacitance(t, F_REF, params)
        assert batch.capacitance[i] == single.capacitance
        assert batch.clamped[i] == single.clamped
        assert batch.achieved_phase[i] == single.achieved_phase


def test_wrap_phase_range():
    assert wrap_phase(np.pi) == pytest.approx(np.pi)
    assert wrap_phase(-np.pi) == pytest.approx(np.pi)
    assert wrap_phase(3.0 * np.pi / 2.0) == pytest.approx(-np.pi / 2.0)
    x = np.linspace(-10, 10, 1001)
    w = wrap_phase(x)
    assert np.all(w > -np.pi - 1e-15)
    assert np.all(w <= np.pi + 1e-15)
    # wrapping preserves the angle modulo a full turn
    assert np.allclose(np.exp(1j * w), np.exp(1j * x), atol=1e-12)
