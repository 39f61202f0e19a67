import csv
import io
import math

import numpy as np
import pytest

from beamlab.cli import (EXIT_ACCEPTANCE, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, FIELD_HEADER, ROOTS_HEADER,
                         format_value, main, read_config_text, read_field_dump)


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_inadmissible_slope_angle_is_a_usage_error(capsys):
    assert main(["roots", "--gamma", "2.0"]) == EXIT_USAGE
    assert "0 < gamma < pi/2" in capsys.readouterr().err


def test_unknown_choices_are_usage_errors(capsys):
    assert main(["roots", "--regime", "other"]) == EXIT_USAGE
    assert main(["residual-sweep", "--target", "w9"]) == EXIT_USAGE
    assert main(["build-field", "--grid", "8"]) == EXIT_USAGE
    assert main(["roots", "--count", "abc"]) == EXIT_USAGE
    assert main(["roots", "--sweep-eps", "1e-6:1e-3"]) == EXIT_USAGE
    assert main(["nonexistent"]) == EXIT_USAGE
    assert main(["build-field"]) == EXIT_USAGE
    capsys.readouterr()


def test_every_subcommand_supports_a_dry_run(capsys):
    for sub in ("roots", "build-field", "interactions", "resonance", "residual-sweep", "localization",
                "dns-compare", "all-acceptance"):
        assert main([sub, "--dry-run"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith(f"# plan: {sub}")
        assert f"subcommand = {sub}" in out


def test_floats_use_seventeen_digits():
    assert format_value(0.1) == "0.10000000000000001"
    assert float(format_value(math.pi)) == math.pi
    assert format_value(True) == "1"


def test_roots_csv_columns_and_certification(tmp_path):
    out = tmp_path / "roots.csv"
    assert main(["roots", "--regime", "critical", "--eps", "1e-5", "--count", "4", "--seed", "3",
                 "--out", str(out), "--strict"]) == EXIT_OK
    text = out.read_text()
    assert text.splitlines()[0].split(",") == ROOTS_HEADER
    rows = rows_of(text)
    assert len(rows) == 4
    for row in rows:
        assert row["certified"] == "true"
        assert float(row["eps"]) == 1e-5
        for j in (1, 2, 3):
            assert float(row[f"re_l{j}"]) > 0
            assert float(row[f"brute_gap{j}"]) <= float(row[f"radius{j}"])


def test_roots_fixed_modulus_over_an_eps_sweep(capsys):
    assert main(["roots", "--regime", "meanflow", "--kmod", "1", "--sweep-eps", "1e-6:1e-3:3",
                 "--count", "2", "--strict"]) == EXIT_OK
    rows = rows_of(capsys.readouterr().out)
    assert [float(r["eps"]) for r in rows] == pytest.approx([1e-6, 1e-6, 10 ** -4.5, 10 ** -4.5, 1e-3, 1e-3])
    assert all(float(r["kmod"]) == 1.0 for r in rows)


def test_roots_fixed_wavevector(capsys):
    assert main(["roots", "--regime", "meanflow", "--eps", "1e-6", "--kmod", "1", "--theta", "0.01"]) == EXIT_OK
    rows = rows_of(capsys.readouterr().out)
    assert len(rows) == 1
    assert float(rows[0]["omega"]) == pytest.approx(math.sin(0.01))


def test_roots_outside_the_regime_is_a_numerical_failure(capsys):
    assert main(["roots", "--regime", "critical", "--kmod", "1", "--theta", "0.1"]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_runs_are_deterministic(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        assert main(["roots", "--regime", "secondharmonic", "--count", "3", "--seed", "7",
                     "--out", str(path)]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert main(["roots", "--regime", "secondharmonic", "--count", "3", "--seed", "8",
                 "--out", str(paths[1])]) == EXIT_OK
    assert paths[0].read_bytes() != paths[1].read_bytes()


def test_sidecar_reproduces_the_run(tmp_path, capsys):
    out = tmp_path / "roots.csv"
    assert main(["roots", "--eps", "1e-5", "--count", "2", "--seed", "5", "--mu", "0.11",
                 "--out", str(out)]) == EXIT_OK
    meta = (tmp_path / "roots.csv.meta").read_text()
    sections = read_config_text(meta)
    assert sections["run"]["seed"] == "5"
    assert float(sections["params"]["mu"]) == 0.11
    assert main(["roots", "--config", str(tmp_path / "roots.csv.meta"), "--dry-run"]) == EXIT_OK
    plan = capsys.readouterr().out
    assert plan.split("\n", 1)[1] == meta
    again = tmp_path / "again.csv"
    assert main(["roots", "--config", str(tmp_path / "roots.csv.meta"), "--out", str(again)]) == EXIT_OK
    assert again.read_bytes() == out.read_bytes()


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[run]\nseed = 4\n\n[params]\neps = 1e-5\n\n[roots]\ncount = 2\n")
    assert main(["roots", "--config", str(cfg), "--count", "3", "--dry-run"]) == EXIT_OK
    plan = capsys.readouterr().out
    assert "eps = 1.0000000000000001e-05" in plan
    assert "count = 3" in plan and "seed = 4" in plan
    cfg.write_text("[options]\nbogus = 1\n")
    assert main(["roots", "--config", str(cfg)]) == EXIT_USAGE
    cfg.write_text("[run]\nsubcommand = resonance\n")
    assert main(["roots", "--config", str(cfg)]) == EXIT_USAGE
    capsys.readouterr()


def test_field_dump_header_and_payload(tmp_path):
    out = tmp_path / "inc.bin"
    assert main(["build-field", "--eps", "1e-3", "--kind", "incident", "--grid", "64,41",
                 "--out", str(out)]) == EXIT_OK
    header, data = read_field_dump(str(out))
    assert (header["nx"], header["ny"], header["components"]) == (64, 41, 3)
    assert out.stat().st_size == FIELD_HEADER.size + 3 * 64 * 41 * 8
    assert FIELD_HEADER.size == 64
    assert np.all(np.isfinite(data)) and np.max(np.abs(data)) > 0
    assert header["x_max"] - header["x_min"] > 0


def test_read_field_dump_rejects_other_files(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"\0" * 128)
    with pytest.raises(ValueError):
        read_field_dump(str(path))


def test_resonance_report(capsys):
    assert main(["resonance", "--eps", "1e-3", "--samples-per-period", "32", "--strict"]) == EXIT_OK
    rows = {r["quantity"]: r for r in rows_of(capsys.readouterr().out)}
    assert float(rows["relative_residual"]["value"]) <= 1e-4
    assert {f"term_{n}_resonant_fraction" for n in "abcd"} <= set(rows)


def test_too_few_time_samples_is_a_numerical_failure(capsys):
    assert main(["resonance", "--eps", "1e-3", "--samples-per-period", "16"]) == EXIT_NUMERICAL
    assert "32" in capsys.readouterr().err


def test_linear_residual_sweep_passes(capsys):
    args = ["residual-sweep", "--target", "w0", "--sweep", "eps", "--points", "4", "--strict"]
    assert main(args) == EXIT_OK
    rows = rows_of(capsys.readouterr().out)
    assert len(rows) == 4
    assert all(r["pass"] == "true" for r in rows)
    assert float(rows[0]["fitted_slope"]) == pytest.approx(1.0, abs=0.15)


def test_interaction_table_flags_the_failing_row(capsys):
    code = main(["interactions", "--table", "--points", "4", "--strict"])
    rows = {r["term"]: r for r in rows_of(capsys.readouterr().out)}
    assert set(rows) == {"a1", "a2", "b1", "b2", "c1", "c2", "d1", "d2", "d3"}
    assert float(rows["c1"]["predicted_eps_exponent"]) == pytest.approx(1 / 6)
    failed = [k for k, r in rows.items() if r["pass"] != "true"]
    assert code == (EXIT_ACCEPTANCE if failed else EXIT_OK)


def test_strict_turns_failed_checks_into_exit_three(capsys):
    args = ["localization", "--lo", "1e-3", "--hi", "1e-2", "--points", "3"]
    assert main(args) == EXIT_OK
    capsys.readouterr()
    assert main(args + ["--strict"]) == EXIT_ACCEPTANCE
    rows = rows_of(capsys.readouterr().out)
    names = {"outside_strip_tilted", "outside_strip_untilted", "bl13_above_layer"}
    assert {r["quantity"] for r in rows} == names


def test_acceptance_subcommand_rejects_unknown_criteria(capsys):
    assert main(["all-acceptance", "--only", "12"]) == EXIT_USAGE
    assert main(["all-acceptance", "--only", "x"]) == EXIT_USAGE
    capsys.readouterr()


def test_acceptance_subcommand_runs_selected_criteria(tmp_path, capsys):
    out = tmp_path / "acc.csv"
    assert main(["all-acceptance", "--only", "11", "--out", str(out)]) == EXIT_OK
    rows = rows_of(out.read_text())
    assert [r["criterion"] for r in rows] == ["11"] and rows[0]["pass"] == "true"
    assert "criterion 11" in capsys.readouterr().out
