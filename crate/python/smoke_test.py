"""Smoke test for the `hetnet` extension module.

Build and install first:

    pip install --no-build-isolation ./crates/py
    python python/smoke_test.py
"""

import math

import hetnet


def check_helpers():
    assert abs(hetnet.path_loss_db("macro", 1000.0) - 128.1) < 1e-9
    assert abs(hetnet.path_loss_db("pico", 100.0) - 104.0) < 1e-9
    assert abs(hetnet.rb_rate_bps(1.0) - 180e3) < 1e-6
    assert hetnet.entry_condition(-100.0, 0.0, -106.0, 9.0)
    assert not hetnet.entry_condition(-100.0, 0.0, -100.0, 0.0)
    got = hetnet.transfer_history(2e6, 5e6, 100.0, 1.0)
    assert math.isclose(got, (100 * 2e6 + 5e6) / 101, rel_tol=1e-12)


def check_agents():
    mab = hetnet.MabAgent(3, seed=7)
    first = [mab.select() for _ in range(1)]
    for _ in range(300):
        a = mab.select()
        mab.update(a, [0.9, 0.5, 0.1][a])
    assert sum(mab.counts) == 300
    assert mab.counts[0] == max(mab.counts), mab.counts
    assert first[0] in (0, 1, 2)

    sat = hetnet.SatisfactionAgent(4, seed=3)
    for _ in range(2000):
        sat.step(False, 0.5)
    assert abs(sum(sat.probs) - 1.0) < 1e-9
    assert all(0.0 <= p <= 1.0 for p in sat.probs)


def check_simulation():
    cfg = """
duration_ms = 1500
[engine]
warmup_ms = 500
[scenario]
ues_per_sector = 5
[learning]
learner = "mab"
"""
    sim = hetnet.Simulation(cfg)
    assert sim.ue_count == 15
    assert sim.cell_count == 6
    sim.step(1500)
    assert sim.clock_ms == 1500
    assert len(sim.serving_cells()) == sim.ue_count
    assert all(0 <= c < sim.cell_count for c in sim.serving_cells())
    report = sim.report()
    assert report["schema"] == 1
    assert report["measured_ttis"] == 1001
    cdf = [p["throughput_bps"] for p in report["ue_throughput_cdf"]]
    assert cdf == sorted(cdf)
    counts = report["handover_counts"]
    assert counts["triggers"] == counts["successes"] + counts["hofs"]

    again = hetnet.run_simulation(cfg)
    assert again == report, "same config and seed must reproduce the report"


def check_errors():
    try:
        hetnet.Simulation("[radio]\nbogus = 1\n")
    except ValueError as e:
        assert "bogus" in str(e)
    else:
        raise AssertionError("unknown key accepted")
    assert "ttt_ms = 480" in hetnet.default_config()


if __name__ == "__main__":
    check_helpers()
    check_agents()
    check_simulation()
    check_errors()
    print("hetnet smoke test passed")
