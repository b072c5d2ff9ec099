import numpy as np
import pytest

from battcool.errors import DataError, NonuniformSampling, ParseError
from battcool.vehicle import (
    LONG_TRIP_REPEATS, DriveCycle, VehicleParams, bundled_cycle, cycle_power, load_cycle, power_balance,
    summarize, traction_power,
)

V = VehicleParams()


def test_standstill():
    assert traction_power(0.0, 0.0, V) == 0.0


def test_cruise_positive():
    assert traction_power(100.0, 100.0, V) > 0


def test_braking_recovers_less():
    up = traction_power(40.0, 50.0, V)
    down = traction_power(50.0, 40.0, V)
    assert down < 0 < up
    assert abs(down) < up


def test_road_load_by_hand():
    v = 72.0 / 3.6
    wheel = (V.mass * 9.81 * V.c_rr + 0.5 * V.air_density * V.cd_a * v * v) * v
    assert traction_power(72.0, 72.0, V) == pytest.approx(wheel / V.eta_drivetrain)


@pytest.mark.parametrize(
    "p_d, p_c, expected", [(0.0, 0.0, 0.0), (10_000.0, 700.0, 11_263.16), (-4000.0, 4200.0, 210.53)]
)
def test_power_balance(p_d, p_c, expected):
    assert power_balance(p_d, p_c, V) == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("name, mean", [("nycc", 11.40), ("sc03", 34.58), ("us06", 77.36)])
def test_bundled_mean_speed(name, mean):
    c = bundled_cycle(name)
    assert len(c) == 600
    assert c.mean_speed == pytest.approx(mean, rel=0.02)
    assert c.repeat == LONG_TRIP_REPEATS[name]


@pytest.mark.parametrize("name, kw", [("nycc", 1.30), ("sc03", 4.43), ("us06", 14.56)])
def test_mean_traction_power(name, kw):
    assert summarize(bundled_cycle(name)).mean_traction_kw == pytest.approx(kw, rel=0.25)


def test_padding_and_repeat(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("time_s,speed_kmh\n" + "".join(f"{i},{5.0 * (i % 4)}\n" for i in range(598)))
    c = load_cycle(p, repeat=3)
    assert len(c) == 600 and c.velocity[-1] == 0.0
    v, v_next = c.speed_pairs()
    assert len(v) == 1800 and v_next[-1] == v[0]
    assert len(cycle_power(c, V)) == 1800


def test_parse_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(ParseError):
        load_cycle(empty)
    bad = tmp_path / "b.csv"
    bad.write_text("time_s,speed_kmh\n0,1\n1,abc\n")
    with pytest.raises(ParseError):
        load_cycle(bad)
    gap = tmp_path / "g.csv"
    gap.write_text("time_s,speed_kmh\n0,1\n1,2\n3,2\n")
    with pytest.raises(NonuniformSampling):
        load_cycle(gap)
    with pytest.raises(ParseError):
        load_cycle(tmp_path / "missing.csv")


def test_cycle_validation():
    with pytest.raises(DataError):
        DriveCycle("x", np.array([1.0, -2.0]))
    with pytest.raises(DataError):
        DriveCycle("x", np.array([]))
    with pytest.raises(DataError):
        bundled_cycle("ftp75")
