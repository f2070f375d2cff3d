import io

from pegsim.fixed import fp
from pegsim.sim.metrics import MetricsFrame, read_csv, restoration_time, write_csv


def test_restoration_examples():
    series = [-0.1, -0.05, -0.005, -0.004, -0.003]
    assert restoration_time(series, "0.01", persistence=2) == 2
    assert restoration_time([-0.1, -0.2, -0.05], "0.01") is None
    assert restoration_time([0.5, 0.2], 1, persistence=1, shock_step=0) == 0


def test_restoration_needs_persistence():
    blip = [-0.1, 0.0, -0.1, 0.0, 0.0, 0.0]
    assert restoration_time(blip, "0.01", persistence=3) == 3
    assert restoration_time(blip, "0.01", persistence=3, shock_step=2) == 1


def test_restoration_counts_from_shock_step():
    series = [0.0] * 5 + [-0.1, -0.1, 0.0, 0.0]
    assert restoration_time(series, "0.01", persistence=2, shock_step=5) == 2


def test_csv_round_trip():
    fr = MetricsFrame(3, fp(100), fp(90), MetricsFrame.spread(fp(100), fp(90)), fp("0.01"), fp("0.001"), fp(100),
                      fp(5), fp(5), 2, fp(7), -fp(3), fp(10**6), fp(10), fp(1), fp(1), fp(10**6), 0, 1)
    buf = io.StringIO()
    write_csv([fr], buf)
    buf.seek(0)
    assert read_csv(buf) == [fr]
    assert fr.d == fp("-0.1")
