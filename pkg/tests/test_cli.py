from __future__ import annotations

import subprocess
import sys

import pytest

from candofsm.cli import main
from candofsm.specio import serialize_spec
from conftest import mutate_table


@pytest.fixture()
def spec_file(spec, tmp_path):
    path = tmp_path / "cando.fsm"
    path.write_text(serialize_spec(spec), encoding="utf-8")
    return str(path)


@pytest.fixture()
def broken_spec_file(spec, tmp_path):
    mutated = mutate_table(spec, "EVT_6", "send_packet_1", "start")
    path = tmp_path / "broken.fsm"
    path.write_text(serialize_spec(mutated), encoding="utf-8")
    return str(path)


class TestCheck:
    def test_clean_spec_exits_zero(self, spec_file, capsys):
        assert main(["check", spec_file]) == 0
        assert "0 violations" in capsys.readouterr().out

    def test_violating_spec_exits_one_and_names_the_rule(self, broken_spec_file,
                                                         capsys):
        assert main(["check", broken_spec_file]) == 1
        out = capsys.readouterr().out
        assert "C1.1" in out

    def test_missing_file_exits_two(self, capsys):
        assert main(["check", "/nonexistent/spec.fsm"]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_malformed_spec_exits_two_with_position(self, tmp_path, capsys):
        path = tmp_path / "bad.fsm"
        path.write_text("states {\n  start control\n}\n", encoding="utf-8")
        assert main(["check", str(path)]) == 2
        err = capsys.readouterr().err
        assert ":2:" in err


class TestSimulate:
    def test_both_engines_write_matching_csvs(self, spec_file, tmp_path, capsys):
        ops_path = tmp_path / "ops.csv"
        reqs_path = tmp_path / "reqs.csv"
        assert main(["simulate", spec_file, "--command", "LED_ON_C",
                     "--engine", "ops", "--out", str(ops_path)]) == 0
        assert main(["simulate", spec_file, "--command", "LED_ON_C",
                     "--engine", "reqs", "--out", str(reqs_path)]) == 0
        capsys.readouterr()
        assert main(["diff", str(ops_path), str(reqs_path)]) == 0
        assert "0 differences" in capsys.readouterr().out

    def test_trace_goes_to_stdout_without_out(self, spec_file, capsys):
        assert main(["simulate", spec_file, "--command", "LED_OFF_C"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("round,state,event,command")

    def test_unknown_command_is_a_usage_error(self, spec_file, capsys):
        assert main(["simulate", spec_file, "--command", "NOPE_C"]) == 3

    def test_zero_round_budget_is_a_usage_error(self, spec_file):
        assert main(["simulate", spec_file, "--command", "LED_ON_C",
                     "--max-rounds", "0"]) == 3

    def test_unknown_flag_is_a_usage_error(self, spec_file, capsys):
        assert main(["simulate", spec_file, "--command", "LED_ON_C",
                     "--frobnicate"]) == 3


class TestDiff:
    def test_identical_files(self, spec_file, tmp_path, capsys):
        out = tmp_path / "t.csv"
        main(["simulate", spec_file, "--command", "DUMMY_C", "--out", str(out)])
        assert main(["diff", str(out), str(out)]) == 0

    def test_mutated_row_reports_one_entry(self, spec_file, tmp_path, capsys):
        left = tmp_path / "left.csv"
        main(["simulate", spec_file, "--command", "DUMMY_C", "--out", str(left)])
        lines = left.read_text().splitlines()
        target = next(i for i, ln in enumerate(lines) if "send_packet_1" in ln)
        lines[target] = lines[target].replace("send_packet_1", "send_packet_2", 1)
        right = tmp_path / "right.csv"
        right.write_text("\n".join(lines) + "\n")
        capsys.readouterr()
        assert main(["diff", str(left), str(right)]) == 1
        out = capsys.readouterr().out
        assert "1 differences" in out
        assert "state" in out

    def test_malformed_csv_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,a,trace\n")
        ok = tmp_path / "ok.csv"
        ok.write_text("also,not,a,trace\n")
        assert main(["diff", str(bad), str(ok)]) == 2

    def test_unreadable_file_exits_two(self, tmp_path):
        assert main(["diff", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 2


class TestVerify:
    def test_bundled_spec_verifies(self, spec_file, capsys):
        assert main(["verify", spec_file]) == 0
        out = capsys.readouterr().out
        assert "Overall: PASS" in out
        assert "requirements" in out  # the generation scale summary

    def test_structural_violations_fail_verification(self, broken_spec_file,
                                                     capsys):
        assert main(["verify", broken_spec_file]) == 1
        assert "C1.1" in capsys.readouterr().out

    def test_diverging_spec_fails_verification(self, spec, tmp_path, capsys):
        mutated = mutate_table(spec, "SPI_TX_FINISH", "send_packet_1",
                               "receive_packet_21")
        path = tmp_path / "diverging.fsm"
        path.write_text(serialize_spec(mutated), encoding="utf-8")
        assert main(["verify", str(path), "--max-rounds", "120"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_parse_failure_exits_two(self, tmp_path):
        path = tmp_path / "bad.fsm"
        path.write_text("nonsense\n", encoding="utf-8")
        assert main(["verify", str(path)]) == 2


class TestReport:
    def test_markdown_contains_the_vled_title(self, spec_file, capsys):
        assert main(["report", spec_file]) == 0
        out = capsys.readouterr().out
        assert "set_vLED to send_packet_6" in out

    def test_output_is_byte_identical_across_runs(self, spec_file, capsys):
        main(["report", spec_file])
        first = capsys.readouterr().out
        main(["report", spec_file])
        second = capsys.readouterr().out
        assert first == second

    def test_html_format(self, spec_file, capsys):
        assert main(["report", spec_file, "--format", "html"]) == 0
        assert capsys.readouterr().out.startswith("<!DOCTYPE html>")

    def test_unknown_format_is_a_usage_error(self, spec_file):
        assert main(["report", spec_file, "--format", "pdf"]) == 3


class TestTopLevel:
    def test_version_flag(self, capsys):
        assert main(["--version"]) == 0
        assert capsys.readouterr().out.strip() == "0.1.0"

    def test_missing_subcommand_is_a_usage_error(self):
        assert main([]) == 3

    def test_module_entry_point_runs(self, spec_file):
        result = subprocess.run(
            [sys.executable, "-m", "candofsm.cli", "check", spec_file],
            capture_output=True, text=True)
        assert result.returncode == 0
        assert "0 violations" in result.stdout
