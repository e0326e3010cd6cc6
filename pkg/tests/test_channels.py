"""Link models: pathloss, LoS and Rician draws, cascades, effective channels."""

import numpy as np
import pytest

from squintsim import (ChannelSet, Node, ScatteringState, cascade_gains,
                       effective_channel, freespace_pathloss, los_channel)
from squintsim.circuit import SPEED_OF_LIGHT
from squintsim.errors import DegenerateChannelError, FrequencyMismatchError
from squintsim.channels import require_nonzero

# frozen against a high-precision reference evaluation
PATHLOSS_1M_2P5GHZ = 0.0095426903184738845
PATHLOSS_20M_2P75GHZ = 0.00043375865083972202


def test_pathloss_pinned_values():
    assert freespace_pathloss(1.0, 2.5e9) == pytest.approx(PATHLOSS_1M_2P5GHZ, rel=1e-14)
    assert freespace_pathloss(20.0, 2.75e9) == pytest.approx(PATHLOSS_20M_2P75GHZ, rel=1e-14)


def test_pathloss_scaling_and_type():
    val = freespace_pathloss(5.0, 2.5e9)
    assert isinstance(val, float)
    # amplitude falls as 1/d and as 1/f
    assert freespace_pathloss(10.0, 2.5e9) == pytest.approx(val / 2.0, rel=1e-14)
    assert freespace_pathloss(5.0, 5.0e9) == pytest.approx(val / 2.0, rel=1e-14)
    arr = freespace_pathloss(np.array([5.0, 10.0]), 2.5e9)
    assert arr.shape == (2,)
    assert arr[0] == pytest.approx(val, rel=1e-15)


@pytest.mark.parametrize("d,f", [(0.0, 2.5e9), (-1.0, 2.5e9), (1.0, 0.0), (1.0, -2.5e9)])
def test_pathloss_validation(d, f):
    with pytest.raises(ValueError):
        freespace_pathloss(d, f)


def test_node_antenna_positions():
    node = Node(position=(1.0, 2.0, 3.0), n_antennas=4, spacing_fraction=0.5,
                axis=(0.0, 0.0, 2.0))
    pos = node.antenna_positions(2.5e9)
    lam = SPEED_OF_LIGHT / 2.5e9
    assert pos.shape == (4, 3)
    assert np.allclose(pos.mean(axis=0), [1.0, 2.0, 3.0])
    assert np.allclose(pos[:, 0], 1.0)
    assert np.allclose(pos[:, 1], 2.0)
    assert np.linalg.norm(pos[1] - pos[0]) == pytest.approx(0.5 * lam)
    single = Node(position=(0.0, 0.0, 0.0))
    assert single.antenna_positions(2.5e9).shape == (1, 3)
    assert np.allclose(single.antenna_positions(2.5e9)[0], 0.0)


def test_node_validation():
    with pytest.raises(ValueError):
        Node(position=(1.0, 2.0))
    with pytest.raises(ValueError):
        Node(position=(0.0, 0.0, 0.0), n_antennas=0)
    with pytest.raises(ValueError):
        Node(position=(0.0, 0.0, 0.0), spacing_fraction=0.0)
    with pytest.raises(ValueError):
        Node(position=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 0.0))


def test_los_channel_single_pair_exact():
    f = 2.5e9
    tx = Node(position=(0.0, 0.0, 0.0))
    rx = Node(position=(3.0, 4.0, 0.0))
    h = los_channel(tx, rx, f)
    assert h.shape == (1, 1)
    d = 5.0
    lam = SPEED_OF_LIGHT / f
    expected = freespace_pathloss(d, f) * np.exp(-2j * np.pi * d / lam)
    assert h[0, 0] == pytest.approx(expected, rel=1e-14)


def test_los_channel_reciprocity():
    f = 2.5e9
    a = Node(position=(0.0, 0.0, 0.0), n_antennas=3)
    b = Node(position=(10.0, 7.0, 2.0), n_antennas=2)
    h_ab = los_channel(a, b, f)
    h_ba = los_channel(b, a, f)
    assert h_ab.shape == (2, 3)
    assert np.allclose(h_ab, h_ba.T, rtol=1e-14)


def test_los_channel_coincident_error():
    tx = Node(position=(1.0, 1.0, 1.0))
    rx = Node(position=(1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        los_channel(tx, rx, 2.5e9)


def test_rician_requires_rng():
    tx = Node(position=(0.0, 0.0, 0.0))
    rx = Node(position=(5.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        los_channel(tx, rx, 2.5e9, k_factor_db=10.0)


def test_rician_seeded_determinism():
    tx = Node(position=(0.0, 0.0, 0.0), n_antennas=4)
    rx = Node(position=(5.0, 8.0, 0.0), n_antennas=2)
    h1 = los_channel(tx, rx, 2.5e9, k_factor_db=10.0, rng=np.random.default_rng(42))
    h2 = los_channel(tx, rx, 2.5e9, k_factor_db=10.0, rng=np.random.default_rng(42))
    h3 = los_channel(tx, rx, 2.5e9, k_factor_db=10.0, rng=np.random.default_rng(43))
    assert np.array_equal(h1, h2)
    assert not np.array_equal(h1, h3)


def test_rician_large_k_collapses_to_los():
    tx = Node(position=(0.0, 0.0, 0.0), n_antennas=2)
    rx = Node(position=(6.0, 3.0, 1.0), n_antennas=2)
    los = los_channel(tx, rx, 2.5e9)
    near = los_channel(tx, rx, 2.5e9, k_factor_db=200.0, rng=np.random.default_rng(0))
    assert np.allclose(near, los, rtol=1e-8)


def test_rician_mean_power_preserved():
    """Per-entry mean power of the fading mix stays near the LoS power."""
    tx = Node(position=(0.0, 0.0, 0.0))
    rx = Node(position=(7.0, 2.0, 0.0))
    los = los_channel(tx, rx, 2.5e9)[0, 0]
    rng = np.random.default_rng(2024)
    draws = np.array([los_channel(tx, rx, 2.5e9, k_factor_db=3.0, rng=rng)[0, 0]
                      for _ in range(4000)])
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(abs(los) ** 2, rel=0.08)
    # the LoS part dominates the mean
    k = 10.0 ** (3.0 / 10.0)
    expected_mean = np.sqrt(k / (k + 1.0)) * los
    assert np.mean(draws) == pytest.approx(expected_mean, rel=0.1)


# --- effective channel ------------------------------------------------------

def random_channel_set(rng, frequency=2.5e9, rx=1, tx=4, n_el=12, blocked=False):
    def cplx(shape):
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return ChannelSet(
        direct=np.zeros((rx, tx), dtype=complex) if blocked else cplx((rx, tx)),
        bs_to_ris=cplx((n_el, tx)),
        ris_to_ue=cplx((rx, n_el)),
        frequency=frequency,
        direct_blocked=blocked,
    )


def state_of(gammas, frequency=2.5e9):
    return ScatteringState(gammas=np.asarray(gammas, dtype=complex),
                           frequency=frequency)


def test_effective_channel_zero_state_is_direct(rng):
    chs = random_channel_set(rng)
    h = effective_channel(chs, state_of(np.zeros(12)))
    assert np.array_equal(h, chs.direct)


def test_effective_channel_matches_brute_force(rng):
    for _ in range(30):
        chs = random_channel_set(rng, rx=int(rng.integers(1, 3)),
                                 tx=int(rng.integers(1, 6)),
                                 n_el=int(rng.integers(1, 20)))
        n = chs.bs_to_ris.shape[0]
        gammas = rng.normal(size=n) + 1j * rng.normal(size=n)
        got = effective_channel(chs, state_of(gammas))
        want = chs.direct.copy()
        for r in range(chs.direct.shape[0]):
            for t in range(chs.direct.shape[1]):
                acc = 0.0 + 0.0j
                for e in range(n):
                    acc += chs.ris_to_ue[r, e] * gammas[e] * chs.bs_to_ris[e, t]
                want[r, t] += acc
        err = np.abs(got - want)
        assert np.all(err <= 1e-12 * np.maximum(np.abs(want), 1e-30))


def test_effective_channel_blocked_drops_direct(rng):
    chs = random_channel_set(rng, blocked=True)
    h = effective_channel(chs, state_of(np.ones(12)))
    expected = (chs.ris_to_ue * np.ones(12)[None, :]) @ chs.bs_to_ris
    assert np.allclose(h, expected, rtol=1e-14)
    # blocked flag drops the direct term even when the matrix is non-zero
    leaky = ChannelSet(direct=np.full((1, 4), 9.0 + 0.0j),
                       bs_to_ris=chs.bs_to_ris, ris_to_ue=chs.ris_to_ue,
                       frequency=2.5e9, direct_blocked=True)
    assert np.allclose(effective_channel(leaky, state_of(np.ones(12))), expected,
                       rtol=1e-14)


def test_effective_channel_frequency_guard(rng):
    chs = random_channel_set(rng)
    with pytest.raises(FrequencyMismatchError):
        effective_channel(chs, state_of(np.ones(12), frequency=2.6e9))
    # tiny relative offsets pass the tolerance
    h = effective_channel(chs, state_of(np.zeros(12), frequency=2.5e9 * (1.0 + 1e-9)))
    assert np.array_equal(h, chs.direct)


def test_effective_channel_length_guard(rng):
    chs = random_channel_set(rng)
    with pytest.raises(ValueError):
        effective_channel(chs, state_of(np.ones(11)))


def test_cascade_gains_consistency(rng):
    chs = random_channel_set(rng, rx=2, tx=3, n_el=5)
    gains = cascade_gains(chs)
    assert gains.shape == (2, 5, 3)
    gammas = rng.normal(size=5) + 1j * rng.normal(size=5)
    via_gains = chs.direct + np.einsum("ret,e->rt", gains, gammas)
    assert np.allclose(via_gains, effective_channel(chs, state_of(gammas)), rtol=1e-13)


def test_channel_set_validation(rng):
    with pytest.raises(ValueError):
        ChannelSet(direct=np.zeros((1, 4), dtype=complex),
                   bs_to_ris=np.zeros((12, 3), dtype=complex),
                   ris_to_ue=np.zeros((1, 12), dtype=complex), frequency=2.5e9)
    with pytest.raises(ValueError):
        ChannelSet(direct=np.zeros((1, 4), dtype=complex),
                   bs_to_ris=np.zeros((12, 4), dtype=complex),
                   ris_to_ue=np.zeros((2, 12), dtype=complex), frequency=2.5e9)
    with pytest.raises(ValueError):
        ChannelSet(direct=np.zeros((1, 4), dtype=complex),
                   bs_to_ris=np.zeros((12, 4), dtype=complex),
                   ris_to_ue=np.zeros((1, 12), dtype=complex), frequency=0.0)
    bad = np.zeros((1, 4), dtype=complex)
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        ChannelSet(direct=bad, bs_to_ris=np.zeros((12, 4), dtype=complex),
                   ris_to_ue=np.zeros((1, 12), dtype=complex), frequency=2.5e9)


def test_require_nonzero():
    require_nonzero(np.array([[0.0, 1.0]]), "link")
    with pytest.raises(DegenerateChannelError):
        require_nonzero(np.zeros((2, 2)), "link")
