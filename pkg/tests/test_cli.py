import pytest

from impactsph import cli
from tests.conftest import TINY_SCENARIO


@pytest.fixture
def tiny_file(tmp_path):
    p = tmp_path / "tiny.ini"
    p.write_text(TINY_SCENARIO.replace("end_time = 0.4 ms",
                                       "end_time = 2 us"))
    return str(p)


def test_mesh_info(tiny_file, capsys):
    rc = cli.main(["mesh-info", "--scenario", tiny_file])
    assert rc == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "particles" in out
    assert "projectile mass" in out


def test_run_short_scenario(tiny_file, tmp_path, capsys):
    rc = cli.main(["run", "--scenario", tiny_file,
                   "--out-dir", str(tmp_path / "out")])
    assert rc == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "terminated      end-time" in out
    assert "outcome" in out
    assert (tmp_path / "out" / "history.csv").exists()


def test_run_velocity_override(tiny_file, capsys):
    rc = cli.main(["run", "--scenario", tiny_file, "--velocity", "150"])
    assert rc == cli.EXIT_OK
    assert "v_initial       150.0 m/s" in capsys.readouterr().out


def test_unknown_scenario_exits_validation(capsys):
    rc = cli.main(["run", "--scenario", "does-not-exist"])
    assert rc == cli.EXIT_VALIDATION
    assert "error:" in capsys.readouterr().err


def test_bad_override_exits_validation(tiny_file, capsys):
    rc = cli.main(["run", "--scenario", tiny_file, "--friction", "3.0"])
    assert rc == cli.EXIT_VALIDATION


def test_bad_resolution_scale(tiny_file):
    rc = cli.main(["run", "--scenario", tiny_file,
                   "--resolution-scale", "-1.0"])
    assert rc == cli.EXIT_VALIDATION


def test_limit_bad_bracket_exits_search(tiny_file, capsys):
    rc = cli.main(["limit", "--scenario", tiny_file,
                   "--v-lo", "300", "--v-hi", "100"])
    assert rc == cli.EXIT_SEARCH
    assert "search failed" in capsys.readouterr().err


def test_sweep_requires_known_axis(tiny_file):
    with pytest.raises(SystemExit):
        cli.main(["sweep", "--scenario", tiny_file,
                  "--axis", "nose_color", "--values", "1.0"])


def test_verify_command(capsys):
    rc = cli.main(["verify"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "all" in out and "checks passed" in out


def test_bench_command(capsys):
    rc = cli.main(["bench", "--n", "2000", "--repeat", "1"])
    assert rc == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "pairs" in out or "numpy" in out


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
