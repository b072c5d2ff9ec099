import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from battcool.economy import (
    CASES, MatrixSpec, RunReport, SensitivityCase, assemble, compare, degradation_reduction,
    life_extension, report_from_trajectory, run_matrix, run_one,
)
from battcool.errors import OutOfEnvelope
from battcool.simulation import NoCooling, simulate


class TestMetrics:
    @pytest.mark.parametrize("q_off, q, pct", [(0.0462, 0.0375, 18.83), (0.0474, 0.0380, 19.83)])
    def test_reduction_examples(self, q_off, q, pct):
        assert degradation_reduction(q, q_off) == pytest.approx(pct, abs=5e-3)

    def test_life_extension_example(self):
        assert life_extension(0.0375, 0.0462) == pytest.approx(23.2, abs=0.05)

    def test_trivial(self):
        assert degradation_reduction(0.04, 0.04) == 0.0
        assert life_extension(0.04, 0.04) == 0.0
        assert life_extension(0.05, 0.04) < 0

    def test_zero_division(self):
        with pytest.raises(ZeroDivisionError):
            degradation_reduction(0.01, 0.0)
        with pytest.raises(ZeroDivisionError):
            life_extension(0.0, 0.01)

    @given(st.floats(1e-3, 10.0), st.floats(1e-9, 1.0))
    def test_identity(self, ratio, q_off):
        q = ratio * q_off
        red = degradation_reduction(q, q_off)
        assert life_extension(q, q_off) == pytest.approx(red / (100.0 - red) * 100.0, rel=1e-9, abs=1e-9)


class TestCases:
    def test_table(self):
        assert [(c.t_air, c.m_clnt, c.a_bat) for c in CASES] == [
            (33.0, 0.180, 3.1), (28.0, 0.180, 3.1), (38.0, 0.180, 3.1), (33.0, 0.144, 2.1)
        ]

    def test_apply(self, plant):
        p = CASES[3].apply(plant)
        assert p.btms.m_clnt == 0.144 and p.btms.a_bat == 2.1 and p.t_air == 33.0

    def test_out_of_envelope(self, plant):
        with pytest.raises(OutOfEnvelope):
            SensitivityCase("hot", 42.0, 0.18, 3.1).apply(plant)


def small_spec(**kw):
    base = dict(strategies=("off", "rule"), cases=CASES[:2], cycles=("nycc",), trips=("short",))
    base.update(kw)
    return MatrixSpec(**base)


class TestMatrix:
    def test_empty(self, plant):
        rep = run_matrix(small_spec(cases=()), plant)
        assert rep.runs == [] and rep.comparisons == []

    def test_jobs_and_pairing(self, plant):
        rep = run_matrix(small_spec(strategies=("rule",)), plant)
        # off twins are added automatically
        assert sorted((r.case, r.strategy) for r in rep.runs) == [
            ("case1", "off"), ("case1", "rule"), ("case2", "off"), ("case2", "rule")
        ]
        c = rep.find("case1", "nycc", "short", "rule")
        assert c is not None and rep.find("case3", "nycc", "short", "rule") is None

    def test_failure_is_recorded(self, plant):
        bad = SensitivityCase("bad", 44.0, 0.18, 3.1)
        rep = run_matrix(small_spec(cases=(CASES[0], bad)), plant)
        fails = rep.failures()
        assert {r.case for r in fails} == {"bad"} and all("OutOfEnvelope" in r.error for r in fails)
        assert rep.find("case1", "nycc", "short", "rule") is not None

    def test_parallel_matches_serial(self, plant):
        a = run_matrix(small_spec(), plant, workers=1)
        b = run_matrix(small_spec(), plant, workers=2)
        assert a.to_json() == b.to_json()

    def test_ledger_closure(self, plant, cycles):
        traj = simulate(cycles["sc03"], NoCooling(), plant)
        r = report_from_trajectory(traj, "case1", "short", "off")
        assert r.cost_total == r.cost_deg + r.cost_ele
        assert r.cost_deg == pytest.approx(traj["cost_deg"].sum(), rel=1e-9)
        assert r.q_loss == pytest.approx(traj["dq_loss"].sum(), rel=1e-9)
        assert r.distance_km == pytest.approx(cycles["sc03"].distance_km, rel=1e-3)

    def test_outputs(self, plant, tmp_path):
        rep = run_matrix(small_spec(), plant)
        doc = json.loads(rep.to_json(tmp_path / "r.json", fingerprint="f00"))
        assert doc["fingerprint"] == "f00" and "runtime_s" not in doc["runs"][0]
        lines = rep.runs_csv(tmp_path / "runs.csv", fingerprint="f00").read_text().splitlines()
        assert lines[0] == "# fingerprint: f00" and len(lines) == 2 + len(rep.runs)
        lines = rep.reductions_csv(tmp_path / "red.csv").read_text().splitlines()
        assert len(lines) == 1 + len(rep.comparisons)


def test_compare_is_per_km():
    off = RunReport("c", "x", "long", "off", 1, distance_km=10.0, cost_per_100km=2.0, q_loss=1e-5)
    run = RunReport("c", "x", "long", "rule", 1, distance_km=20.0, cost_per_100km=1.5, q_loss=1.6e-5)
    cmp = compare(run, off)
    assert cmp.degradation_reduction == pytest.approx(20.0)
    assert cmp.cost_reduction_per_100km == pytest.approx(0.5)


def test_assemble_skips_unmatched():
    run = RunReport("c", "x", "short", "rule", 1, distance_km=1.0, q_loss=1.0)
    assert assemble([run]).comparisons == []


def test_run_one_unknown_strategy_raises(plant):
    with pytest.raises(ValueError):
        run_one((CASES[0], "nycc", "short", "pid"), plant, small_spec())
