import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sinesteer.errors import LengthMismatch, SeriesTooShort
from sinesteer.metrics import AngleSeries, rmse, whiteness, write_report_csv

series = st.lists(st.floats(-300, 300), min_size=3, max_size=60)


def loop_rmse(g, p):
    total = 0.0
    for a, b in zip(g, p):
        total += (a - b) * (a - b)
    return math.sqrt(total / len(g))


def test_rmse_identity():
    assert rmse([1.0, -2.0, 3.0], [1.0, -2.0, 3.0]) == 0.0


def test_rmse_two_terms():
    assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5), abs=1e-12)
    assert rmse(AngleSeries([0, 0]), AngleSeries([3, 4])) == pytest.approx(3.5355339059327378, abs=1e-12)


def test_rmse_matches_loop_oracle():
    rng = np.random.default_rng(11)
    g, p = rng.normal(0, 40, 1000), rng.normal(0, 40, 1000)
    assert abs(rmse(g, p) - loop_rmse(g.tolist(), p.tolist())) < 1e-12


def test_rmse_length_mismatch():
    with pytest.raises(LengthMismatch):
        rmse([1, 2, 3], [1, 2])


@given(series, st.floats(-100, 100))
def test_rmse_properties(values, offset):
    g = np.array(values)
    p = g[::-1].copy()
    assert rmse(g, p) == pytest.approx(rmse(p, g))
    assert rmse(g, p) >= 0
    assert rmse(g + offset, p + offset) == pytest.approx(rmse(g, p), abs=1e-9)


def test_whiteness_constant():
    assert whiteness(AngleSeries(np.full(20, 12.0), 0.5)) == 0.0


@pytest.mark.parametrize("m,dt,n", [(3.0, 0.5, 10), (-1.25, 0.1, 7), (40.0, 1.0, 3)])
def test_whiteness_ramp(m, dt, n):
    # interior (P[i+1]-P[i-1])/2dt = m, end differences (P[1]-P[0])/dt = m
    values = [m * i * dt for i in range(n)]
    assert abs(whiteness(AngleSeries(values, dt)) - m * m) < 1e-12 * max(1.0, m * m)
    assert whiteness(values, dt=dt, scheme="forward") == pytest.approx(m * m)


def test_whiteness_by_hand():
    # P = [0, 2, 1, 5], dt = 1 -> derivatives [2, 0.5, 1.5, 4]
    expected = (4 + 0.25 + 2.25 + 16) / 4
    assert whiteness([0.0, 2.0, 1.0, 5.0], dt=1.0) == pytest.approx(expected)
    # forward differences [2, -1, 4] over 3 terms
    assert whiteness([0.0, 2.0, 1.0, 5.0], dt=1.0, scheme="forward") == pytest.approx(21 / 3)


def test_whiteness_too_short():
    with pytest.raises(SeriesTooShort):
        whiteness([1.0, 2.0])


@given(series, st.floats(-50, 50), st.floats(-5, 5))
def test_whiteness_invariances(values, offset, scale):
    p = np.array(values)
    base = whiteness(p, dt=0.5)
    assert whiteness(p + offset, dt=0.5) == pytest.approx(base, rel=1e-9, abs=1e-6)
    assert whiteness(scale * p, dt=0.5) == pytest.approx(scale * scale * base, rel=1e-9, abs=1e-6)
    assert whiteness(p, dt=0.25) == pytest.approx(4 * base, rel=1e-12, abs=1e-9)


def test_report_csv(tmp_path):
    path = tmp_path / "r.csv"
    write_report_csv([("rmse", 1.5, "deg")], path)
    assert path.read_text() == "metric,value,unit\nrmse,1.5,deg\n"
