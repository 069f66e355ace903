import csv
import json

import pytest

from capfilm.cli import REPORT_COLUMNS, SWEEP_COLUMNS, VERIFY_COLUMNS, main
from capfilm.film import FilmComplex, film_from_dict, film_to_dict
from capfilm.scenarios import three_disk_frame


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def scen(scenario_dir):
    return lambda name: scenario_dir / f"{name}.scenario"


# --------------------------------------------------------------------------
# solve


def test_solve_lens(scen, tmp_path):
    assert run("solve", scen("two_disk_lens"), "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "report.csv")
    assert list(rows[0]) == REPORT_COLUMNS
    assert float(rows[0]["lambda"]) > 0
    assert rows[0]["classification"] == "non_collapsed"
    assert rows[0]["spanning_ok"] == "true"
    svg = (tmp_path / "film.svg").read_text()
    assert svg.count("<circle") == 2
    assert svg.count('class="boundary"') == 2 and 'class="collapsed"' not in svg


def test_solve_three_disk(scen, tmp_path):
    assert run("solve", scen("three_disk_collapsed"), "--out", tmp_path) == 0
    row = read_csv(tmp_path / "report.csv")[0]
    assert float(row["lambda"]) < 0
    assert row["classification"] == "exteriorly_collapsed"
    svg = (tmp_path / "film.svg").read_text()
    assert svg.count('class="collapsed"') == 3
    assert 'stroke-width="4"' in svg


def test_solve_writes_a_round_trippable_film(scen, tmp_path):
    assert run("solve", scen("two_disk_lens"), "--out", tmp_path) == 0
    data = json.loads((tmp_path / "film.json").read_text())
    f = film_from_dict(data)
    assert film_to_dict(f) == data


def test_csv_uses_crlf(scen, tmp_path):
    run("solve", scen("two_disk_lens"), "--out", tmp_path)
    raw = (tmp_path / "report.csv").read_bytes()
    assert raw.count(b"\r\n") == 2


def test_resolution_flag(scen, tmp_path):
    assert run("solve", scen("two_disk_lens"), "--out", tmp_path, "--resolution", 0.02) == 0
    assert run("solve", scen("two_disk_lens"), "--out", tmp_path, "--resolution", -1) == 1


def test_solve_without_liquid_is_a_data_error(scen, tmp_path, capsys):
    assert run("solve", scen("unit_segment"), "--out", tmp_path) == 1
    assert "no liquid region" in capsys.readouterr().err


def test_malformed_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.scenario"
    bad.write_text("version = 1\nepsilon = = 3\n")
    assert run("solve", bad, "--out", tmp_path) == 1
    assert "line 2, column" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [[], ["fly", "x"], ["solve"], ["solve", "/nonexistent.scenario"]],
)
def test_usage_errors(argv, tmp_path):
    assert run(*argv, *(["--out", tmp_path] if len(argv) > 1 else [])) == 1


def test_single_epsilon_commands_reject_lists(scen, tmp_path):
    assert run("solve", scen("two_disk_lens"), "--out", tmp_path, "--epsilon-list", 1e-3, 2e-3) == 1


def test_non_convergence_exits_two(tmp_path, scenario_dir):
    text = (scenario_dir / "two_disk_lens.scenario").read_text()
    path = tmp_path / "short.scenario"
    path.write_text(text.replace("[solver]", "[solver]\nmax_iterations = 2"))
    assert run("solve", path, "--out", tmp_path) == 2


# --------------------------------------------------------------------------
# sweep


def test_sweep_needs_four_points(scen, tmp_path, capsys):
    assert run("sweep", scen("two_disk_lens"), "--out", tmp_path, "--epsilon-list", 1e-3) == 1
    assert "need ≥4 points" in capsys.readouterr().err


def test_sweep_lens(scen, tmp_path):
    eps = [1e-2, 1e-4, 3e-3, 3e-4, 1e-3]
    assert run("sweep", scen("two_disk_lens"), "--out", tmp_path, "--epsilon-list", *eps) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert list(rows[0]) == SWEEP_COLUMNS
    assert [float(r["epsilon"]) for r in rows] == sorted(eps)
    fits = {r["quantity"]: r for r in read_csv(tmp_path / "fits.csv")}
    assert 0.9 <= float(fits["lambda"]["exponent"]) <= 1.1
    assert fits["lambda"]["sign"] == "positive"
    assert (tmp_path / "scaling.svg").read_text().startswith("<?xml")


def test_sweep_output_independent_of_thread_count(scen, tmp_path, monkeypatch):
    eps = [1e-4, 3e-4, 1e-3, 3e-3]
    outs = []
    for n in ("1", "4"):
        monkeypatch.setenv("CAPFILM_THREADS", n)
        out = tmp_path / n
        assert run("sweep", scen("two_disk_lens"), "--out", out, "--epsilon-list", *eps) == 0
        outs.append([(out / name).read_bytes() for name in ("sweep.csv", "fits.csv", "scaling.svg")])
    assert outs[0] == outs[1]


def test_bad_thread_cap(scen, tmp_path, monkeypatch):
    monkeypatch.setenv("CAPFILM_THREADS", "many")
    eps = [1e-4, 3e-4, 1e-3, 3e-3]
    assert run("sweep", scen("two_disk_lens"), "--out", tmp_path, "--epsilon-list", *eps) == 1


def test_failed_sweep_keeps_partial_csv(tmp_path, scenario_dir):
    text = (scenario_dir / "two_disk_lens.scenario").read_text()
    path = tmp_path / "short.scenario"
    path.write_text(text.replace("[solver]", "[solver]\nmax_iterations = 1"))
    assert run("sweep", path, "--out", tmp_path, "--epsilon-list", 1e-4, 3e-4, 1e-3, 3e-3) == 2
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 4 and all(r["converged"] == "false" for r in rows)


# --------------------------------------------------------------------------
# verify


def test_verify_three_disk(scen, tmp_path):
    assert run("verify", scen("three_disk_collapsed"), "--out", tmp_path, "--all") == 0
    rows = read_csv(tmp_path / "verify.csv")
    assert list(rows[0]) == VERIFY_COLUMNS
    assert {r["check"] for r in rows} >= {"convex_hull", "first_variation", "hull_field", "density",
                                         "junction_balance", "expansion"}
    assert all(r["status"] == "pass" for r in rows)


def test_verify_large_lens_skips_hull_checks(scen, tmp_path):
    assert run("verify", scen("two_disk_large"), "--out", tmp_path) == 0
    status = {r["check"]: r["status"] for r in read_csv(tmp_path / "verify.csv")}
    assert status["convex_hull"] == "skipped"
    assert status["hull_field"] == "skipped"
    assert status["first_variation"] == "pass"
    assert status["density"] == "pass"


def test_verify_a_saved_film(scen, tmp_path):
    assert run("solve", scen("two_disk_lens"), "--out", tmp_path) == 0
    assert run("verify", scen("two_disk_lens"), "--film", tmp_path / "film.json", "--out", tmp_path) == 0


def test_verify_corrupted_film(scen, tmp_path, capsys):
    bad = tmp_path / "film.json"
    bad.write_text('{"version": 1, "wireframe": [')
    assert run("verify", scen("two_disk_lens"), "--film", bad, "--out", tmp_path) == 1
    assert "line 1 column" in capsys.readouterr().err


def test_verify_film_on_other_frame(scen, tmp_path):
    path = tmp_path / "other.json"
    path.write_text(json.dumps(film_to_dict(FilmComplex(three_disk_frame()))))
    assert run("verify", scen("two_disk_lens"), "--film", path, "--out", tmp_path) == 1


# --------------------------------------------------------------------------
# render


def test_render_lens_film(scen, tmp_path):
    run("solve", scen("two_disk_lens"), "--out", tmp_path)
    out = tmp_path / "render"
    assert run("render", tmp_path / "film.json", "--out", out) == 0
    svg = (out / "film.svg").read_text()
    assert svg.count("<circle") == 2 and svg.count('class="boundary"') == 2


def test_render_empty_film(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text(json.dumps(film_to_dict(FilmComplex(three_disk_frame()))))
    assert run("render", path, "--out", tmp_path) == 0
    svg = (tmp_path / "film.svg").read_text()
    assert svg.count("<circle") == 3 and "<path" not in svg


def test_render_is_byte_stable(scen, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("render", scen("three_disk_collapsed"), "--out", a) == 0
    assert run("render", scen("three_disk_collapsed"), "--out", b) == 0
    assert (a / "film.svg").read_bytes() == (b / "film.svg").read_bytes()
