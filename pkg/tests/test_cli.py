"""
Тесты CLI: команды, форматы вывода, коды выхода, ошибки входа

Запуск:
    pytest tests/test_cli.py -v

Сравнение с эталонами tests/golden/*.json: эталон хранит группы строками,
проверяются только указанные в нём ключи.
"""

import json

import pytest

from leray_engine.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, main
from leray_engine.schemas import ReportEnvelope

pytestmark = pytest.mark.integration


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_records(capsys, *argv):
    code, out, err = run(capsys, *argv, "--format", "records")
    return code, ReportEnvelope.model_validate_json(out)


def table_strings(table):
    return {f"{e.p},{e.q}": str(e.group) for e in table.entries if not e.group.is_zero()}


def error_payload(err: str) -> dict:
    """Последняя JSON-строка stderr"""
    lines = [line for line in err.splitlines() if line.startswith("{")]
    assert lines, f"no JSON error on stderr: {err!r}"
    return json.loads(lines[-1])


def assert_matches_golden(envelope: ReportEnvelope, golden_dir, name: str):
    expected = json.loads((golden_dir / f"{name}.json").read_text(encoding="utf-8"))
    assert envelope.command == expected["command"]
    assert envelope.status == expected["status"]
    if "cohomology" in expected:
        assert [str(row.group) for row in envelope.cohomology] == expected["cohomology"]
    pages = {str(pg.r): pg.table for pg in envelope.pages}
    for r, table in expected.get("pages", {}).items():
        assert table_strings(pages[r]) == table, f"page E_{r}"
    for name_, table in expected.get("tables", {}).items():
        assert table_strings(envelope.reports[0].tables[name_]) == table, name_
    if "reports" in expected:
        assert [{"name": r.name, "passed": r.passed} for r in envelope.reports] == expected["reports"]


# ===========================================
# Commands against golden files
# ===========================================

class TestGolden:

    def test_cohomology_rp2(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(capsys, "cohomology", str(fixtures_dir / "rp2.json"))
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "cohomology_rp2")

    def test_cohomology_rp2_rational(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(capsys, "cohomology", str(fixtures_dir / "rp2.json"), "--coefficients", "q")
        assert code == EXIT_OK
        assert env.coefficients.value == "q"
        assert_matches_golden(env, golden_dir, "cohomology_rp2_rational")

    def test_cohomology_twisted_sheaf(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(
            capsys, "cohomology", str(fixtures_dir / "circle.json"),
            "--sheaf", str(fixtures_dir / "twisted_circle_sheaf.json"),
        )
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "cohomology_twisted_circle")

    def test_cohomology_point(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(capsys, "cohomology", str(fixtures_dir / "point.json"))
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "cohomology_point")

    def test_cohomology_empty_complex(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(capsys, "cohomology", str(fixtures_dir / "empty.json"))
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "cohomology_empty")

    def test_pages(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(
            capsys, "pages", str(fixtures_dir / "d2_complex.json"), str(fixtures_dir / "d2_filtration.json"),
        )
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "pages_d2")
        d2 = env.pages[1].table.differentials
        assert [(d.p, d.q) for d in d2] == [(0, 0)]
        print("✅ pages command reproduces the d_2 example")

    def test_pages_dec(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(
            capsys, "pages", str(fixtures_dir / "d2_complex.json"), str(fixtures_dir / "d2_filtration.json"), "--dec",
        )
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "pages_d2_dec")

    def test_couple(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(
            capsys, "couple", str(fixtures_dir / "d2_complex.json"), str(fixtures_dir / "d2_filtration.json"),
            "--verify",
        )
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "couple_d2")

    def test_verify_dec_files(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(
            capsys, "verify-dec", str(fixtures_dir / "d2_complex.json"), str(fixtures_dir / "d2_filtration.json"),
        )
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "verify_dec_d2")

    def test_verify_dec_random(self, capsys, golden_dir):
        code, env = run_records(capsys, "verify-dec", "--random", "3", "--seed", "1")
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "verify_dec_random")

    def test_leray_klein(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(
            capsys, "leray", str(fixtures_dir / "klein_map.json"), str(fixtures_dir / "circle_skeleta.json"),
            "--verify",
        )
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "leray_klein")
        print("✅ leray command on the Klein bottle")

    def test_leray_torus(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(
            capsys, "leray", str(fixtures_dir / "torus_map.json"), str(fixtures_dir / "circle_vertex_first.json"),
            "--verify",
        )
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "leray_torus")

    def test_leray_identity(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(
            capsys, "leray", str(fixtures_dir / "identity_circle_map.json"), str(fixtures_dir / "circle_skeleta.json"),
            "--verify",
        )
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "leray_identity")

    def test_leray_pair(self, capsys, fixtures_dir, golden_dir):
        code, env = run_records(
            capsys, "leray", str(fixtures_dir / "moebius_map.json"), str(fixtures_dir / "circle_vertex_first.json"),
            "--pairs", "v0", "--verify",
        )
        assert code == EXIT_OK
        assert_matches_golden(env, golden_dir, "leray_moebius_pair")


# ===========================================
# Output formats
# ===========================================

class TestOutput:

    def test_table_format(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "cohomology", str(fixtures_dir / "rp2.json"))
        assert code == EXIT_OK
        assert out.splitlines()[0] == "# cohomology (coefficients z): ok"
        assert "  H^2 = Z/2" in out.splitlines()

    def test_rational_table_uses_q(self, capsys, fixtures_dir):
        _, out, _ = run(capsys, "cohomology", str(fixtures_dir / "circle.json"), "--coefficients", "q")
        assert "  H^1 = Q" in out.splitlines()

    def test_records_round_trip(self, capsys, fixtures_dir):
        code, out, _ = run(
            capsys, "leray", str(fixtures_dir / "klein_map.json"), str(fixtures_dir / "circle_skeleta.json"),
            "--format", "records",
        )
        assert code == EXIT_OK
        env = ReportEnvelope.model_validate_json(out)
        assert env.status == "ok"
        assert env.reports[0].passed
        assert json.loads(env.model_dump_json()) == json.loads(out)

    def test_leray_table_lists_verdict(self, capsys, fixtures_dir):
        _, out, _ = run(
            capsys, "leray", str(fixtures_dir / "klein_map.json"), str(fixtures_dir / "circle_skeleta.json"),
        )
        assert any(line.startswith("== leray: PASS") for line in out.splitlines())
        assert "  note: degenerates at E_2" in out.splitlines()

    def test_verify_dec_random(self, capsys):
        code, env = run_records(capsys, "verify-dec", "--random", "5", "--seed", "1")
        assert code == EXIT_OK
        assert env.status == "PASS"
        assert [r.name for r in env.reports] == [f"dec shift #{s}" for s in range(1, 6)]


# ===========================================
# Errors and exit codes
# ===========================================

class TestErrors:

    def test_corrupted_incidence(self, capsys, fixtures_dir):
        code, out, err = run(capsys, "cohomology", str(fixtures_dir / "corrupted_sphere.json"))
        assert code == EXIT_INPUT
        assert out == ""
        payload = error_payload(err)
        assert payload["error"] == "InvalidCellComplexError"
        assert payload["details"]["coface"] == "D+"
        print("✅ corrupted incidence gives a structured error")

    def test_malformed_json(self, capsys, fixtures_dir):
        code, _, err = run(capsys, "cohomology", str(fixtures_dir / "broken.json"))
        assert code == EXIT_INPUT
        payload = error_payload(err)
        assert payload["error"] == "InputError"
        assert payload["details"]["line"] == 4

    def test_schema_violation(self, capsys, fixtures_dir):
        code, _, err = run(capsys, "cohomology", str(fixtures_dir / "d2_filtration.json"))
        assert code == EXIT_INPUT
        assert error_payload(err)["error"] == "InputError"

    def test_non_utf8_file(self, capsys, tmp_path):
        path = tmp_path / "latin.json"
        path.write_bytes(b'{"cells": [{"id": "\xff\xfe", "dim": 0}]}')
        code, out, err = run(capsys, "cohomology", str(path))
        assert code == EXIT_INPUT
        assert out == ""
        payload = error_payload(err)
        assert payload["error"] == "InputError"
        assert payload["details"]["offset"] == 19
        assert payload["details"]["file"] == str(path)

    def test_unknown_cell_in_levels(self, capsys, fixtures_dir, tmp_path):
        path = tmp_path / "levels.json"
        path.write_text('{"levels": {"v0": 0, "v1": 0, "e0": 1, "e1": 1, "e7": 1}}', encoding="utf-8")
        code, _, err = run(capsys, "leray", str(fixtures_dir / "klein_map.json"), str(path))
        assert code == EXIT_INPUT
        payload = error_payload(err)
        assert payload["error"] == "InvalidCellComplexError"
        assert payload["details"]["cell"] == "e7"

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "cohomology", str(tmp_path / "nowhere.json"))
        assert code == EXIT_INPUT
        assert error_payload(err)["error"] == "InputError"

    def test_non_cellular_filtration(self, capsys, fixtures_dir):
        code, _, err = run(
            capsys, "leray", str(fixtures_dir / "klein_map.json"), str(fixtures_dir / "circle_one_step.json"),
        )
        assert code == EXIT_INPUT
        payload = error_payload(err)
        assert payload["error"] == "NotCellularError"
        assert payload["details"]["a"] == 0

    def test_pair_not_closed(self, capsys, fixtures_dir):
        code, _, err = run(
            capsys, "leray", str(fixtures_dir / "moebius_map.json"), str(fixtures_dir / "circle_vertex_first.json"),
            "--pairs", "e0",
        )
        assert code == EXIT_INPUT
        assert error_payload(err)["error"] == "NotClosedError"

    def test_verify_dec_needs_input(self, capsys):
        code, _, err = run(capsys, "verify-dec")
        assert code == EXIT_INPUT
        assert error_payload(err)["error"] == "InputError"

    def test_unknown_command(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(["spectral"])
        assert exc_info.value.code == 2
        capsys.readouterr()

    def test_failed_verification_exits_one(self, capsys, fixtures_dir, monkeypatch):
        from leray_engine import cli
        from leray_engine.schemas import VerificationReport

        def failing(*args, **kwargs):
            report = VerificationReport(name="couple")
            report.expect("forced", False)
            return report

        monkeypatch.setattr(cli, "verify_couple_against_filtration", failing)
        code, out, _ = run(
            capsys, "couple", str(fixtures_dir / "d2_complex.json"), str(fixtures_dir / "d2_filtration.json"),
            "--verify",
        )
        assert code == EXIT_FAIL
        assert "FAIL" in out.splitlines()[0]


# ===========================================
# Settings
# ===========================================

def test_fixtures_dir_from_environment(capsys, fixtures_dir, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("LERAY_FIXTURES_DIR", str(fixtures_dir))
    code, out, _ = run(capsys, "cohomology", "circle.json")
    assert code == EXIT_OK
    assert "  H^1 = Z" in out.splitlines()


def test_default_format_from_environment(capsys, fixtures_dir, monkeypatch):
    monkeypatch.setenv("LERAY_OUTPUT_FORMAT", "records")
    code, out, _ = run(capsys, "cohomology", str(fixtures_dir / "point.json"))
    assert code == EXIT_OK
    env = ReportEnvelope.model_validate_json(out)
    assert [str(row.group) for row in env.cohomology] == ["Z"]
