import csv
import math

import numpy as np
import pytest

from impactsph import driver
from impactsph.driver import (
    BallisticResult, BracketError, DriverError, History, Simulation,
    find_ballistic_limit, residual_velocity, run_sweep, write_history,
    write_snapshot, read_snapshot,
)
from impactsph.scenario import with_overrides


def _rows(n, v=100.0, contact=0.0, t0=0.0):
    base = {c: 0.0 for c in driver.HISTORY_COLUMNS}
    out = []
    for k in range(n):
        row = dict(base)
        row.update(time=t0 + (k + 1) * 1e-6, proj_velocity=v,
                   contact_force=contact, n_particles=0,
                   n_active_elements=0)
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# history bookkeeping

def test_history_append_and_column():
    h = History()
    for row in _rows(3, v=250.0):
        h.append(**row)
    assert len(h) == 3
    assert np.allclose(h.column("proj_velocity"), 250.0)
    assert np.all(np.diff(h.column("time")) > 0.0)


def test_history_rejects_missing_column():
    h = History()
    with pytest.raises(DriverError, match="missing"):
        h.append(time=0.0)


def test_history_rejects_nonincreasing_time():
    h = History()
    row = _rows(1)[0]
    h.append(**row)
    with pytest.raises(DriverError, match="increase"):
        h.append(**row)


def test_write_history_roundtrip(tmp_path):
    h = History()
    for row in _rows(4, v=123.456):
        h.append(**row)
    p = tmp_path / "hist.csv"
    write_history(h, p)
    with open(p, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert float(rows[0]["proj_velocity"]) == 123.456
    assert tuple(rows[0].keys()) == driver.HISTORY_COLUMNS


def test_write_history_bad_path():
    h = History()
    with pytest.raises(DriverError):
        write_history(h, "/no/such/dir/hist.csv")


def test_residual_velocity_mean_of_tail():
    h = History()
    for row in _rows(25, v=150.0):
        h.append(**row)
    assert residual_velocity(h) == pytest.approx(150.0)


def test_residual_velocity_needs_enough_rows():
    h = History()
    for row in _rows(5):
        h.append(**row)
    with pytest.raises(DriverError, match="rows"):
        residual_velocity(h)


def test_residual_velocity_requires_contact_free_tail():
    h = History()
    rows = _rows(25)
    rows[-1]["contact_force"] = 10.0
    for row in rows:
        h.append(**row)
    with pytest.raises(DriverError, match="contact"):
        residual_velocity(h)


# ---------------------------------------------------------------------------
# ballistic limit bisection

def _fake_runner(v_star):
    calls = []

    def run_fn(v):
        calls.append(v)
        if v > v_star:
            return "perforated", math.sqrt(v * v - v_star * v_star)
        return "embedded", 0.0

    return run_fn, calls


def test_bisection_finds_threshold():
    run_fn, calls = _fake_runner(184.5)
    res = find_ballistic_limit(run_fn, 100.0, 300.0, tol=1.0)
    assert isinstance(res, BallisticResult)
    assert res.v_bl == pytest.approx(184.5, abs=1.0)
    assert res.bracket_width <= 1.0


def test_bisection_run_count():
    # 2 bracket checks plus ceil(log2(range/tol)) midpoints
    run_fn, calls = _fake_runner(200.0)
    find_ballistic_limit(run_fn, 100.0, 300.0, tol=25.0)
    assert len(calls) == 2 + math.ceil(math.log2(200.0 / 25.0))


def test_bisection_bracket_violation_low():
    run_fn, _ = _fake_runner(50.0)       # 100 m/s already perforates
    with pytest.raises(BracketError, match="already perforates"):
        find_ballistic_limit(run_fn, 100.0, 300.0, tol=10.0)


def test_bisection_bracket_violation_high():
    run_fn, _ = _fake_runner(500.0)      # 300 m/s does not perforate
    with pytest.raises(BracketError, match="does not perforate"):
        find_ballistic_limit(run_fn, 100.0, 300.0, tol=10.0)


def test_bisection_rejects_bad_bracket_args():
    run_fn, _ = _fake_runner(200.0)
    with pytest.raises(BracketError):
        find_ballistic_limit(run_fn, 300.0, 100.0, tol=10.0)
    with pytest.raises(BracketError):
        find_ballistic_limit(run_fn, 100.0, 300.0, tol=0.0)


def test_bisection_runs_recorded():
    run_fn, _ = _fake_runner(184.5)
    res = find_ballistic_limit(run_fn, 150.0, 250.0, tol=10.0)
    vs = [r[0] for r in res.runs]
    assert vs[0] == 150.0 and vs[1] == 250.0
    outcomes = {r[2] for r in res.runs}
    assert outcomes == {"perforated", "embedded"}


# ---------------------------------------------------------------------------
# sweeps

def test_sweep_rejects_unknown_axis(tiny_scenario):
    with pytest.raises(DriverError, match="axis"):
        run_sweep(tiny_scenario, "nose_color", [1.0])


def test_sweep_rejects_empty_values(tiny_scenario):
    with pytest.raises(DriverError, match="at least one"):
        run_sweep(tiny_scenario, "velocity", [])


# ---------------------------------------------------------------------------
# simulation construction and stepping

def test_initial_state(tiny_scenario):
    sim = Simulation(tiny_scenario)
    assert sim.projectile_velocity() == pytest.approx(300.0)
    # summed reference density makes the initial pressure field vanish
    assert np.allclose(sim.pstate.p, 0.0)
    assert sim.projectile_tip() < 0.0
    assert sim.e0 == pytest.approx(sim.kinetic_energy())
    assert sim.internal_energy() == 0.0


def test_step_advances_time(tiny_scenario):
    sim = Simulation(tiny_scenario)
    dt = sim.step()
    assert dt > 0.0
    assert sim.time == dt
    assert sim.step_count == 1


def test_short_run_terminates_on_end_time(tiny_scenario):
    scn = with_overrides(tiny_scenario, end_time=2.0e-6)
    sim = Simulation(scn)
    hist = sim.run()
    assert hist.terminated == "end-time"
    assert len(hist) >= 2
    assert np.all(np.diff(hist.column("time")) > 0.0)
    ledger = sim.energy_ledger()
    assert abs(ledger["defect"]) < 0.05 * ledger["initial"]


def test_single_thread_determinism(tiny_scenario):
    a = Simulation(tiny_scenario)
    b = Simulation(tiny_scenario)
    for _ in range(5):
        a.step()
        b.step()
    assert np.array_equal(a.ps.pos, b.ps.pos)
    assert np.array_equal(a.ps.vel, b.ps.vel)
    assert np.array_equal(a.proj.nodes, b.proj.nodes)
    assert np.array_equal(a.pstate.S, b.pstate.S)


def test_outcome_classification(tiny_scenario):
    sim = Simulation(tiny_scenario)
    assert sim.outcome() == "embedded" or sim.projectile_tip() < 0.0
    # force the three branches by editing state
    sim.proj.vel[:, 2] = 100.0
    sim.proj.nodes[:, 2] += tiny_scenario.target.thickness + 0.1
    assert sim.outcome() == "perforated"
    sim.proj.vel[:, 2] = -5.0
    assert sim.outcome() == "rebounded"
    sim.proj.vel[:, 2] = 0.0
    sim.proj.nodes[:, 2] -= tiny_scenario.target.thickness + 0.1
    assert sim.outcome() == "embedded"


def test_snapshot_roundtrip(tmp_path, tiny_scenario):
    sim = Simulation(tiny_scenario)
    p = tmp_path / "snap.csv"
    write_snapshot(sim, p)
    snap = read_snapshot(p)
    n_sph = sim.ps.n
    assert np.count_nonzero(snap["kind"] == "sph") == n_sph
    assert len(snap["id"]) == n_sph + sum(m.n_nodes for m in sim.meshes())
    # particle positions survive the text round trip exactly
    assert np.array_equal(snap["x"][:n_sph], sim.ps.pos[:, 0])
    assert np.array_equal(snap["vz"][:n_sph], sim.ps.vel[:, 2])


def test_run_writes_outputs(tmp_path, tiny_scenario):
    scn = with_overrides(tiny_scenario, end_time=1.0e-6)
    sim = Simulation(scn, out_dir=str(tmp_path / "out"))
    sim.run()
    assert (tmp_path / "out" / "history.csv").exists()
    assert (tmp_path / "out" / "snapshot_0000.csv").exists()
