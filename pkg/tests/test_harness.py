import numpy as np
import pytest

from macflow.harness import (CATALOG, ConvergenceRow, ConvergenceTable, observed_order,
                             registered_checks, run_convergence, run_single, run_verify)
from macflow.io import read_field_csv
from macflow.macgrid import GridError, read_grid_file


def test_every_catalog_entry_has_a_check():
    assert set(CATALOG) <= set(registered_checks())


def test_verify_default_run_passes():
    res = run_verify(42, (4, 8, 16), (2,))
    assert res.passed
    assert {r.name for r in res.records} == set(CATALOG)
    assert all(r.grids > 0 for r in res.records)


def test_verify_is_deterministic():
    a = run_verify(7, (4,), (2,), samples=1).to_csv()
    b = run_verify(7, (4,), (2,), samples=1).to_csv()
    assert a == b


def test_verify_empty_sizes():
    res = run_verify(42, (), (2,))
    assert res.records == [] and res.passed


def test_verify_3d_smoke():
    assert run_verify(1, (3, 4), (2, 3), samples=1).passed


def test_verify_rejects_tiny_sizes():
    with pytest.raises(ValueError):
        run_verify(1, (1,), (2,))


def test_record_pass_rule():
    res = run_verify(3, (4,), (2,), samples=1, checks=["poincare"])
    rec = res.records[0]
    assert rec.passed == (rec.max_violation <= rec.tolerance)


def test_table_orders_and_csv():
    t = ConvergenceTable("p", "centred", "stokes", 1.0)
    t.add(ConvergenceRow(0.2, None, 25, 4e-2, 1e-1, 1e-2))
    assert "order_l2" not in t.to_csv()
    t.add(ConvergenceRow(0.1, None, 100, 1e-2, 5e-2, 5e-3))
    assert t.orders("l2")[0] == pytest.approx(2.0)
    assert t.orders("h1")[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        t.add(ConvergenceRow(0.1, None, 100, 1e-3, 1e-3, 1e-3))
    assert observed_order(1.0, 0.25, np.log(2)) == pytest.approx(2.0)


def test_single_level_table_has_no_orders():
    t = run_convergence("poly-cavity", levels=1, equations="stokes")
    assert len(t.rows) == 1
    assert t.to_csv().splitlines()[0] == "h,cells,error_l2,error_h1,error_p"


def test_convergence_failure_gives_partial_table():
    t = run_convergence("stokes-ms", levels=2, amplitude=1e4)
    assert not t.complete and "failed" in t.message
    assert len(t.rows) < 2


def test_run_single_zero_forcing(tmp_path):
    grid_file = tmp_path / "g.txt"
    grid_file.write_text("dim: 2\ncoords_x: 0,0.2,0.7,1\ncoords_y: 0,0.5,1\n")
    res = run_single(grid_file=grid_file, out_dir=tmp_path / "out")
    assert res.report.converged
    u = read_field_csv(tmp_path / "out" / "velocity.csv", res.grid)
    assert not any(np.any(c) for c in u.components)


def test_run_single_taylor_green_round_trip(tmp_path):
    res = run_single("taylor-green", out_dir=tmp_path, cells=32)
    grid = read_grid_file(tmp_path / "grid.txt")
    u = read_field_csv(tmp_path / "velocity.csv", grid)
    p = read_field_csv(tmp_path / "pressure.csv", grid)
    for a, b in zip(u.components, res.velocity.components):
        assert np.array_equal(a, b)
    assert np.array_equal(p.values, res.pressure.values)
    assert (tmp_path / "energy.csv").exists()


def test_run_single_malformed_grid(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("dim: 2\ncoords_x: 0,1\ncoords_y: 0,0.5,0.4\n")
    with pytest.raises(GridError, match="line 3"):
        run_single(grid_file=bad)


def test_run_single_needs_input():
    with pytest.raises(ValueError):
        run_single()


def test_run_single_outputs_are_deterministic(tmp_path):
    run_single("stokes-ms", out_dir=tmp_path / "a", cells=8)
    run_single("stokes-ms", out_dir=tmp_path / "b", cells=8)
    for name in ("velocity.csv", "pressure.csv", "residuals.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
