import json
import math

import pytest
from hypothesis import given, strategies as st
from statsmodels.stats.proportion import proportion_confint

from pscm.cli import main
from pscm.sim import (CSV_HEADER, BlerRecord, ExperimentConfig, Link, ebno_at_bler, read_results,
                      run_point, run_sweep, shaping_gain, summarize, wilson_interval, write_results)

SMALL_SHAPED = dict(mode="shaped", order=16, n_sh=64, k_sh=40, rate="1/2", n_fec=128,
                    batch_size=25, timing=False)
SMALL_UNIFORM = dict(mode="uniform", order=16, rate="1/2", n_fec=128, batch_size=25,
                     timing=False)
SMALL_QAM64 = dict(mode="shaped", order=64, n_sh=64, k_sh=40, rate="1/2", n_fec=96,
                   batch_size=25, timing=False)


def cfg(base, **kw):
    d = dict(base)
    d.update(kw)
    return ExperimentConfig.from_dict(d)


def test_small_layouts():
    link = Link(cfg(SMALL_SHAPED))
    assert link.rate == 0.5 and link.info_bits == 64
    assert link.layout.k_sign == 24 and link.code.k == 88
    link = Link(cfg(SMALL_QAM64))
    assert link.rate == 0.5


@pytest.mark.parametrize("bad", [dict(mode="fancy"), dict(order=32), dict(k_sh=0),
                                 dict(k_sh=65), dict(n_sh=63, order=64), dict(rate="3/2"),
                                 dict(demapper="x"), dict(batch_size=0), dict(unknown=1)])
def test_config_rejects(bad):
    with pytest.raises((ValueError, TypeError)):
        cfg(SMALL_SHAPED, **bad)


def test_unreachable_rate_rejected():
    with pytest.raises(ValueError):
        Link(cfg(SMALL_SHAPED, rate="7/8"))


def test_config_json_round_trip(tmp_path):
    c = cfg(SMALL_SHAPED, ebno_db=[1, 2.5])
    p = tmp_path / "c.json"
    p.write_text(json.dumps(c.to_dict()))
    assert ExperimentConfig.from_json(p) == c


@pytest.mark.parametrize("base", [SMALL_SHAPED, SMALL_UNIFORM, SMALL_QAM64])
def test_zero_noise_identity(base):
    c = cfg(base, max_trials=1000, min_block_errors=1)
    r = run_point(c, 20.0)
    assert r.trials == 1000 and r.block_errors == 0 and r.bit_errors == 0


@pytest.mark.parametrize("base", [SMALL_SHAPED, SMALL_UNIFORM])
def test_huge_noise_fails(base):
    r = run_point(cfg(base, max_trials=200, min_block_errors=50), -20.0)
    assert r.bler > 0.95


def test_deterministic_and_stopping():
    c = cfg(SMALL_SHAPED, max_trials=400, min_block_errors=30)
    a = run_point(c, 4.0)
    b = run_point(c, 4.0)
    assert a == b
    assert a.block_errors >= 30 or a.trials == 400
    assert a.trials % 25 == 0 or a.trials == 400


def test_flat_trials():
    c = cfg(SMALL_UNIFORM, max_trials=110, min_block_errors=1, flat_trials=True)
    r = run_point(c, -5.0)
    assert r.trials == 110 and r.block_errors == 110


def test_serial_equals_parallel():
    base = cfg(SMALL_SHAPED, ebno_db=[3.0, 4.0], max_trials=200, min_block_errors=40)
    par = cfg(SMALL_SHAPED, ebno_db=[3.0, 4.0], max_trials=200, min_block_errors=40, workers=2)
    assert run_sweep(base).records == run_sweep(par).records


def test_disjoint_seeds_agree():
    a = run_point(cfg(SMALL_UNIFORM, seed=1, max_trials=400, min_block_errors=400), 3.0)
    b = run_point(cfg(SMALL_UNIFORM, seed=2, max_trials=400, min_block_errors=400), 3.0)
    assert a != b
    assert a.ci_lo <= b.ci_hi and b.ci_lo <= a.ci_hi


def test_bler_decreases_over_sweep():
    res = run_sweep(cfg(SMALL_UNIFORM, ebno_db=[0.0, 2.0, 4.0, 6.0], max_trials=300,
                        min_block_errors=300))
    b = [r.bler for r in res.records]
    assert all(x >= y for x, y in zip(b, b[1:]))
    assert b[0] > b[-1]


def test_single_point_no_crossing():
    res = run_sweep(cfg(SMALL_UNIFORM, ebno_db=[4.0], max_trials=50))
    assert len(res.records) == 1 and res.crossing is None


@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_bounds(e, n):
    e = min(e, n)
    lo, hi = wilson_interval(e, n)
    assert 0 <= lo <= e / n <= hi <= 1


@pytest.mark.parametrize("e,n", [(0, 50), (10, 100), (37, 1000), (100, 100)])
def test_wilson_matches_statsmodels(e, n):
    lo, hi = wilson_interval(e, n)
    ref = proportion_confint(e, n, alpha=0.05, method="wilson")
    assert (lo, hi) == pytest.approx(ref, abs=1e-12)


def rec(x, bler):
    return BlerRecord(x, 100, int(bler * 100), bler, 0, 0.0, bler, bler, 0.0)


def test_crossing_interpolation():
    r = [rec(1.0, 0.5), rec(2.0, 0.02)]
    t = (math.log(0.1) - math.log(0.5)) / (math.log(0.02) - math.log(0.5))
    assert ebno_at_bler(r) == pytest.approx(1 + t)
    assert ebno_at_bler([rec(1.0, 0.5), rec(2.0, 0.0)]) == pytest.approx(1.8)
    assert ebno_at_bler([rec(1.0, 0.5), rec(2.0, 0.3)]) is None
    assert ebno_at_bler([rec(2.0, 0.02), rec(1.0, 0.5)]) == pytest.approx(1 + t)


def test_gain_rate_guard():
    a = summarize(cfg(SMALL_SHAPED), 0.5, [rec(1.0, 0.5), rec(2.0, 0.02)])
    b = summarize(cfg(SMALL_UNIFORM), 0.5, [rec(2.0, 0.5), rec(3.0, 0.02)])
    g = shaping_gain(a, b)
    assert g["gain_db"] == pytest.approx(1.0)
    c = summarize(cfg(SMALL_UNIFORM), 0.5 + 1e-8, b.records)
    with pytest.raises(ValueError, match="rates differ"):
        shaping_gain(a, c)


def test_write_read(tmp_path):
    p = tmp_path / "r.csv"
    write_results([], p)
    assert p.read_text() == ",".join(CSV_HEADER) + "\n"
    c = cfg(SMALL_SHAPED, seed=1234, max_trials=50)
    recs = [run_point(c, 3.0), run_point(c, 20.0)]
    write_results(recs, p, c, {"rate": 0.5})
    assert read_results(p) == recs
    side = json.loads(p.with_suffix(".json").read_text())
    assert side["seed"] == 1234 and side["config"]["k_sh"] == 40 and "version" in side


def test_write_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "r.csv"
    with pytest.raises(OSError, match="missing"):
        write_results([], bad)


def test_cli_describe_and_errors(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL_SHAPED))
    assert main(["describe", "--config", str(p)]) == 0
    out = capsys.readouterr().out
    assert "k_sign=24" in out and "r=0.500000" in out
    p.write_text(json.dumps(dict(SMALL_SHAPED, k_sh=999)))
    assert main(["describe", "--config", str(p)]) != 0
    assert main(["describe", "--config", str(tmp_path / "nope.json")]) != 0


def test_cli_sweep_and_compare(tmp_path, capsys):
    s = tmp_path / "s_cfg.json"
    u = tmp_path / "u_cfg.json"
    s.write_text(json.dumps(dict(SMALL_SHAPED, ebno_db=[2.0, 6.0], max_trials=100)))
    u.write_text(json.dumps(dict(SMALL_UNIFORM, ebno_db=[2.0, 6.0], max_trials=100)))
    assert main(["sweep", "--config", str(s), "--seed", "5", "--out", str(tmp_path / "s.csv")]) == 0
    assert main(["sweep", "--config", str(u), "--out", str(tmp_path / "u.csv")]) == 0
    side = json.loads((tmp_path / "s.json").read_text())
    assert side["seed"] == 5
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "s.csv"), str(tmp_path / "u.csv")]) == 0
    assert "gain_db" in capsys.readouterr().out


def test_cli_tables(capsys):
    assert main(["tables", "--table", "1"]) == 0
    out = capsys.readouterr().out
    assert " 160 0.8382" in out
