import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import hourly_groupby
from spinres.data import (HOUSEHOLD_SPLITS, MG_SPLITS, MGParams, SeriesBundle, Splits,
                          hourly_household, load_household, make_splits, mg_generate,
                          normalize_minmax, synthetic_household, write_uci_file)
from spinres.errors import ConfigError, DataError, SizingError

T0 = dt.datetime(2008, 3, 1, 0, 0)


# --------------------------------------------------------------------------- Mackey-Glass

def test_mg_fixed_point_is_exact():
    x = mg_generate(MGParams(x0=1.0, n_samples=3000))
    assert np.abs(x - 1.0).max() <= 1e-12


def test_mg_step_halving():
    coarse = mg_generate(MGParams())
    fine = mg_generate(MGParams(dt=0.05, downsample=20))
    assert np.abs(coarse - fine)[:100].max() < 1e-6


def test_mg_linear_interpolation_option_converges_slower():
    c = mg_generate(MGParams(interpolation="linear"))
    f = mg_generate(MGParams(dt=0.05, downsample=20, interpolation="linear"))
    herm = mg_generate(MGParams(dt=0.01, downsample=100))
    assert np.abs(c - f)[:100].max() < 1e-4
    assert np.abs(f - herm)[:100].max() < 1e-4


def test_mg_bounded_and_chaotic():
    x = mg_generate(MGParams(n_samples=5000))
    assert 0.0 < x.min() and x.max() < 1.6
    assert np.ptp(x[1000:]) > 0.5
    assert x[0] == 1.2


def test_mg_transient_skip_and_determinism():
    full = mg_generate(MGParams(n_samples=450))
    skipped = mg_generate(MGParams(n_samples=431, transient=19))
    assert np.array_equal(full[19:], skipped)
    assert np.array_equal(mg_generate(), mg_generate())


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(tau=17.05), dict(downsample=0),
                                dict(interpolation="cubic")])
def test_mg_param_validation(kw):
    with pytest.raises(ConfigError):
        MGParams(**kw)


# --------------------------------------------------------------------------- normalization

def test_normalize_example():
    b = normalize_minmax([0.0, 5.0, 10.0])
    assert np.array_equal(b.normalized, [-1.0, 0.0, 1.0])
    with pytest.raises(DataError):
        normalize_minmax([2.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50).filter(lambda v: max(v) > min(v)))
def test_normalize_roundtrip(values):
    b = normalize_minmax(values)
    assert b.normalized.min() == -1.0 and b.normalized.max() == 1.0
    scale = max(1.0, np.abs(values).max())
    assert np.abs(b.denormalize(b.normalized) - np.array(values)).max() <= 1e-12 * scale


def test_normalization_uses_full_window():
    x = np.concatenate([np.linspace(0, 1, 50), [3.0], np.linspace(0, 1, 10)])
    b = make_splits(normalize_minmax(x), 5, 40, 10)
    assert b.vmax == 3.0 and b.normalized[50] == 1.0
    assert b.normalized[:45].max() < 0.0


def test_bundle_csv_roundtrip(tmp_path):
    b = normalize_minmax(mg_generate())
    b.to_csv(tmp_path / "mg.csv")
    back = SeriesBundle.from_csv(tmp_path / "mg.csv")
    assert np.array_equal(back.raw, b.raw) and np.array_equal(back.normalized, b.normalized)
    assert (tmp_path / "mg.csv").read_text().splitlines()[0] == "index,raw,normalized"


# --------------------------------------------------------------------------- splits

def test_mg_preset_split_positions():
    b = make_splits(normalize_minmax(mg_generate()), *MG_SPLITS)
    sp = b.splits
    assert list(sp.washout_range) == list(range(30))
    assert sp.train_range == range(30, 400)
    # 1-based steps 402..431
    assert [i + 1 for i in sp.test_range] == list(range(402, 432))


def test_household_preset_split_positions():
    sp = Splits(*HOUSEHOLD_SPLITS, 284)
    assert len(sp.washout_range) == 20 and len(sp.train_range) == 220
    assert [i + 1 for i in sp.test_range] == list(range(262, 285))


@settings(max_examples=50, deadline=None)
@given(w=st.integers(0, 50), tr=st.integers(0, 50), te=st.integers(0, 50),
       extra=st.integers(0, 20))
def test_splits_partition(w, tr, te, extra):
    sp = Splits(w, tr, te, w + tr + te + extra)
    idx = [i for r in sp.ranges().values() for i in r]
    assert idx == list(range(sp.length))


def test_split_overflow():
    with pytest.raises(SizingError):
        make_splits(normalize_minmax(np.arange(10.0)), 5, 5, 1)


# --------------------------------------------------------------------------- household

def test_constant_hours(tmp_path):
    path = tmp_path / "c.txt"
    write_uci_file(path, T0, [2.0] * 120)
    start, vals, present = hourly_household(path)
    assert start == T0 and np.array_equal(vals, [2.0, 2.0])
    assert np.array_equal(present, [60, 60])


def test_hour_mean_of_ramp(tmp_path):
    path = tmp_path / "r.txt"
    write_uci_file(path, T0, [float(k) for k in range(1, 61)])
    assert hourly_household(path)[1][0] == 30.5


def test_half_present_rule(tmp_path):
    vals = [1.0] * 30 + [None] * 30 + [1.0] * 29 + [None] * 31
    path = tmp_path / "h.txt"
    write_uci_file(path, T0, vals)
    _, hourly, present = hourly_household(path)
    assert hourly[0] == 1.0 and np.isnan(hourly[1])
    assert list(present) == [30, 29]


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), hours=st.integers(2, 30), p_missing=st.floats(0.0, 0.8))
def test_hourly_means_match_groupby_oracle(tmp_path_factory, seed, hours, p_missing):
    rng = np.random.default_rng(seed)
    start = T0 + dt.timedelta(minutes=int(rng.integers(0, 60)))
    vals = [None if rng.random() < p_missing else round(float(rng.uniform(0.05, 6.0)), 3)
            for _ in range(hours * 60)]
    path = tmp_path_factory.mktemp("hh") / "f.txt"
    write_uci_file(path, start, vals)
    first, hourly, _ = hourly_household(path)
    ref = hourly_groupby(start, vals)
    assert len(ref) == len(hourly)
    for k, (h, v) in enumerate(ref.items()):
        assert h == first + dt.timedelta(hours=k)
        if v is None:
            assert np.isnan(hourly[k])
        else:
            assert abs(hourly[k] - v) <= 1e-12 * max(1.0, abs(v))


def test_uci_format_roundtrip_with_question_marks(tmp_path):
    vals = [1.5, None, 2.25, None, 0.75] + [1.0] * 55
    path = tmp_path / "q.txt"
    write_uci_file(path, dt.datetime(2006, 12, 16, 17, 0), vals)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("Date;Time;Global_active_power;")
    assert lines[1].startswith("16/12/2006;17:00:00;1.5;")
    assert lines[2] == "16/12/2006;17:01:00;?;?;?;?;?;?;"
    _, hourly, present = hourly_household(path)
    assert present[0] == 58
    assert hourly[0] == pytest.approx((1.5 + 2.25 + 0.75 + 55) / 58, rel=1e-15)


def test_missing_hour_in_window_is_named(tmp_path):
    path = tmp_path / "g.txt"
    write_uci_file(path, T0, synthetic_household(10, gap_hours=(4,)))
    with pytest.raises(DataError, match="2008-03-01 04:00"):
        load_household(path, (0, 8))
    b = load_household(path, (5, 5))
    assert len(b) == 5 and b.meta["window_start"] == "2008-03-01T05:00:00"
    # default start skips past the gap
    assert load_household(path, (None, 5)).meta["window_offset"] == 5
    assert load_household(path, ("2008-03-01T05:00", 5)).meta["window_offset"] == 5


def test_window_out_of_range_and_malformed(tmp_path):
    path = tmp_path / "g.txt"
    write_uci_file(path, T0, synthetic_household(6))
    with pytest.raises(DataError):
        load_household(path, (3, 5))
    bad = tmp_path / "bad.txt"
    text = path.read_text().splitlines()
    text[3] = "1/3/2008;00:02:00;abc;0;0;0;0;0;0"
    bad.write_text("\n".join(text) + "\n")
    with pytest.raises(DataError, match=":4:"):
        hourly_household(bad)
    text[3] = "1/3/2008"
    bad.write_text("\n".join(text) + "\n")
    with pytest.raises(DataError, match=":4:"):
        hourly_household(bad)
    hdr = tmp_path / "hdr.txt"
    hdr.write_text("when;what\n")
    with pytest.raises(DataError):
        hourly_household(hdr)


def test_household_normalized_window(tmp_path):
    path = tmp_path / "s.txt"
    write_uci_file(path, T0, synthetic_household(300, seed=3))
    b = load_household(path, (None, 284))
    assert len(b) == 284
    assert b.normalized.min() == -1.0 and b.normalized.max() == 1.0
