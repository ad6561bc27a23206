import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinres.errors import ConfigError, DataError, SizingError
from spinres.micromag import DeviceGeometry, MaterialParams, device_state, relax
from spinres.reservoir import (DriveProtocol, InputMap, MicromagBackend, StateMatrix,
                               SurrogateBackend, SurrogateConfig, drive_device, drive_ensemble,
                               drive_surrogate, map_input_to_ku, surrogate_ensemble,
                               surrogate_step)

# short protocol so the small-device tests run in seconds
FAST = DriveProtocol(pulse_duration=0.2e-9, relax_duration=0.4e-9, node_interval=0.1e-9,
                     nodes_per_period=6)


@pytest.fixture(scope="module")
def small_device():
    g = DeviceGeometry(24e-9, 2e-9, 16e-9)
    p = MaterialParams()
    st_, _ = relax(device_state(g), p, 2e-9, 1e-4, precess=False, damping=0.5)
    return g, st_, p


# --------------------------------------------------------------------------- input map

def test_map_input_endpoints_and_midpoint():
    im = InputMap(7.5e5, 7.5e3, (-1.0, 1.0))
    assert map_input_to_ku(-1.0, im) == 7.5e5
    assert map_input_to_ku(1.0, im) == 7.5e5 - 7.5e3
    assert map_input_to_ku(0.0, im) == pytest.approx(7.5e5 - 7.5e3 / 2, rel=1e-15)
    assert im.clamped == 0


def test_map_input_clamps_with_counter(caplog):
    im = InputMap(input_range=(0.0, 2.0))
    with caplog.at_level(logging.WARNING):
        assert map_input_to_ku(5.0, im) == im.ku_baseline - im.ku_max_reduction
        assert map_input_to_ku(-3.0, im) == im.ku_baseline
    assert im.clamped == 2
    assert "clamped" in caplog.text


@pytest.mark.parametrize("kw", [dict(ku_max_reduction=0.0), dict(ku_max_reduction=8e5),
                                dict(input_range=(1.0, 1.0))])
def test_input_map_validation(kw):
    with pytest.raises(ConfigError):
        InputMap(**kw)


def test_protocol_validation():
    assert DriveProtocol().sample_times()[-1] == pytest.approx(18e-9)
    with pytest.raises(ConfigError):
        DriveProtocol(node_interval=2e-9)
    with pytest.raises(ConfigError):
        DriveProtocol(node_interval=0.0)


# --------------------------------------------------------------------------- surrogate

def test_surrogate_trivial_examples():
    cfg = SurrogateConfig(input_weight=0.5)
    assert np.array_equal(surrogate_step(np.zeros(6), 0.0, cfg), np.zeros(6))
    np.testing.assert_array_equal(surrogate_step(np.zeros(6), 1.0, cfg), np.full(6, 0.5))


def test_ring_update_rule():
    cfg = SurrogateConfig(node_count=4, self_weight=0.3, neighbor_weight=0.2, input_weight=0.7)
    r = np.array([1.0, 2.0, 3.0, 4.0])
    want = [0.3 * r[i] + 0.2 * r[(i - 1) % 4] + 0.7 * 0.5 for i in range(4)]
    np.testing.assert_allclose(surrogate_step(r, 0.5, cfg), want, rtol=1e-15)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), act=st.sampled_from(["linear", "tanh"]))
def test_ring_contraction_bound(seed, act):
    rng = np.random.default_rng(seed)
    cfg = SurrogateConfig(self_weight=0.4, neighbor_weight=0.3, activation=act,
                          bias=tuple(rng.uniform(-1, 1, 6)))
    u = rng.uniform(-1, 1, 50)
    r1, r2 = rng.normal(size=6), rng.normal(size=6)
    d0 = np.linalg.norm(r1 - r2)
    for k, uk in enumerate(u):
        prev = np.linalg.norm(r1 - r2)
        r1, r2 = surrogate_step(r1, uk, cfg), surrogate_step(r2, uk, cfg)
        # rounding floor: two states that agree to the last bit cannot contract further
        assert np.linalg.norm(r1 - r2) <= 0.7 * prev * (1 + 1e-12) + 8 * np.finfo(float).eps
    assert np.linalg.norm(r1 - r2) < 0.7**50 * d0 + 8 * np.finfo(float).eps


def test_ring_requires_fading_memory():
    with pytest.raises(ConfigError):
        SurrogateConfig(self_weight=0.6, neighbor_weight=0.4)


def test_dense_mode_spectral_radius_and_determinism():
    cfg = SurrogateConfig(topology="dense", spectral_radius=0.8, seed=7, activation="tanh")
    p, q, _ = cfg.matrices()
    assert max(abs(np.linalg.eigvals(p))) == pytest.approx(0.8, rel=1e-12)
    assert abs(p.mean()) < 0.5 and q.shape == (6,)
    p2, q2, _ = SurrogateConfig(topology="dense", spectral_radius=0.8, seed=7).matrices()
    assert np.array_equal(p, p2) and np.array_equal(q, q2)


def test_drive_surrogate_shapes_and_zero_input():
    cfgs = surrogate_ensemble(3)
    sm = drive_surrogate(cfgs, np.zeros(12))
    assert sm.shape == (12, 18) and not sm.values.any()
    u = np.random.default_rng(0).uniform(-1, 1, 400)
    sm = drive_surrogate(cfgs, u)
    assert sm.shape == (400, 18)
    assert np.array_equal(sm.values, drive_surrogate(surrogate_ensemble(3), u).values)


def test_ensemble_jitter_and_bias():
    base = SurrogateConfig()
    a = surrogate_ensemble(3, base, jitter=0.1, bias_scale=0.5, seed=4)
    for c in a:
        assert abs(c.self_weight / base.self_weight - 1) <= 0.1
        assert abs(c.input_weight / base.input_weight - 1) <= 0.1
        assert max(abs(b) for b in c.bias) <= 0.5
    assert a[0] != a[1]
    assert surrogate_ensemble(1, base, jitter=0.0)[0].self_weight == base.self_weight


def test_surrogate_backend_stepping_matches_batch():
    cfgs = surrogate_ensemble(2, SurrogateConfig(activation="tanh"), bias_scale=1.0)
    u = np.linspace(-1, 1, 20)
    be = SurrogateBackend(cfgs)
    rows = np.array([be.step(x) for x in u])
    assert np.array_equal(rows, drive_surrogate(cfgs, u).values)
    be.reset()
    assert np.array_equal(be.run(u).values, rows)


# --------------------------------------------------------------------------- state matrix

def test_state_matrix_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    sm = StateMatrix(rng.normal(size=(5, 12)), rng.normal(size=5), 2, 6)
    path = tmp_path / "s.csv"
    sm.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header.startswith("step,input,d0_n0,") and header.endswith("d1_n5")
    back = StateMatrix.from_csv(path)
    assert np.array_equal(back.values, sm.values) and np.array_equal(back.inputs, sm.inputs)
    assert (back.devices, back.nodes) == (2, 6)


def test_state_matrix_is_read_only_and_checked(tmp_path):
    sm = StateMatrix(np.zeros((3, 6)), np.zeros(3), 1, 6)
    with pytest.raises(ValueError):
        sm.values[0, 0] = 1.0
    with pytest.raises(SizingError):
        StateMatrix(np.zeros((3, 6)), np.zeros(4), 1, 6)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        StateMatrix.from_csv(bad)


# --------------------------------------------------------------------------- micromagnetic driver

def test_drive_device_empty_and_shape(small_device):
    g, st_, p = small_device
    sm, final = drive_device(st_, [], FAST, InputMap(), p, g)
    assert sm.shape == (0, 6)
    assert np.array_equal(final.m, st_.m)
    sm, final = drive_device(st_, [0.1, -0.4, 0.9, 0.0, 1.0], FAST, InputMap(), p, g)
    assert sm.shape == (5, 6)
    assert np.all(np.abs(sm.values) <= 1.0)
    assert final.time == pytest.approx(st_.time + 5 * FAST.period)


def test_drive_device_responds_and_carries_state(small_device):
    g, st_, p = small_device
    sm, _ = drive_device(st_, [1.0, 1.0], FAST, InputMap(), p, g)
    base, _ = drive_device(st_, [-1.0, -1.0], FAST, InputMap(), p, g)
    # u = lo holds Ku at baseline: the relaxed state barely moves
    assert np.abs(base.values - base.values[0, 0]).max() < 1e-5
    assert np.abs(sm.values - base.values).max() > 1e-5
    # splitting the input sequence and carrying the state over changes nothing
    first, mid = drive_device(st_, [0.3], FAST, InputMap(), p, g)
    second, _ = drive_device(mid, [0.7], FAST, InputMap(), p, g)
    whole, _ = drive_device(st_, [0.3, 0.7], FAST, InputMap(), p, g)
    assert np.array_equal(np.vstack([first.values, second.values]), whole.values)


def test_drive_ensemble_composition(small_device):
    g, st_, p = small_device
    g2 = DeviceGeometry(28e-9, 2e-9, 16e-9)
    st2, _ = relax(device_state(g2), p, 2e-9, 1e-4, precess=False, damping=0.5)
    u = [0.5, -0.2, 0.8]
    one = drive_ensemble([(g, st_)], u, FAST, InputMap(), p)
    alone, _ = drive_device(st_, u, FAST, InputMap(), p, g)
    assert np.array_equal(one.values, alone.values)
    ab = drive_ensemble([(g, st_), (g2, st2)], u, FAST, InputMap(), p)
    ba = drive_ensemble([(g2, st2), (g, st_)], u, FAST, InputMap(), p, jobs=2)
    assert ab.shape == (3, 12)
    assert np.array_equal(ab.values[:, :6], ba.values[:, 6:])
    assert np.array_equal(ab.values[:, 6:], ba.values[:, :6])


def test_micromag_backend_matches_drive_device(small_device):
    g, st_, p = small_device
    u = [0.2, 0.9, -0.5]
    be = MicromagBackend([(g, st_)], p, FAST)
    rows = be.run(u).values
    ref, _ = drive_device(st_, u, FAST, InputMap(), p, g)
    assert np.array_equal(rows, ref.values)
    be.reset()
    assert np.array_equal(be.run(u).values, rows)
    assert len(be.fingerprint()) == 16


def test_constant_input_converges(small_device):
    """Consecutive periods under a constant input approach a fixed pattern."""
    g, st_, p = small_device
    sm, _ = drive_device(st_, [0.6] * 8, FAST, InputMap(), p, g)
    diffs = np.abs(np.diff(sm.values, axis=0)).max(axis=1)
    floor = 1e-12
    assert diffs[0] > floor
    for a, b in zip(diffs[2:], diffs[3:]):
        assert b < a or b < floor
    assert diffs[-1] < 1e-3 * diffs[0]
