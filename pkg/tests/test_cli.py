"""Game file schema, canonical serialization, commands, and exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from abgames import Buchi, CoBuchi, LimsupAverage
from abgames.cli import (
    bundled_fixture,
    main,
    parse_game,
    parse_game_payload,
    serialize_game,
)
from abgames.errors import SchemaViolation

FIXTURES = (
    "exabs.game",
    "bigmatch.game",
    "delayedexit.game",
    "stubborn.game",
    "quitting.game",
    "matrix2x2.game",
    "noexit.game",
)


def minimal_payload(**overrides):
    doc = {
        "schema": "abgames-game-v1",
        "name": "tiny",
        "actions1": ["a", "b"],
        "actions2": ["c", "d"],
        "absorb_prob": [["0", "0"], ["1", "1"]],
        "absorb_payoff1": [[None, None], ["0.5", "0.5"]],
        "absorb_payoff2": [[None, None], ["0.5", "0.5"]],
        "payoff1": {"kind": "constant", "value": "0.5"},
        "payoff2": {"kind": "constant", "value": "0.5"},
        "bound": "1.0",
    }
    doc.update(overrides)
    return doc


class TestGameFiles:
    @pytest.mark.parametrize("name", FIXTURES)
    def test_fixture_round_trips_byte_identically(self, name):
        raw = bundled_fixture(name).read_bytes()
        game = parse_game_payload(json.loads(raw))
        assert serialize_game(game).encode("utf-8") == raw

    def test_accepts_fractions_decimals_and_numbers(self):
        forms = ["0.5", "1/2", 0.5]
        games = [
            parse_game_payload(minimal_payload(
                absorb_payoff1=[[None, None], [form, form]]))
            for form in forms
        ]
        for game in games[1:]:
            assert np.array_equal(game.absorb_payoff1[1], games[0].absorb_payoff1[1])

    def test_fractions_parse_exactly(self):
        game = parse_game_payload(minimal_payload(
            absorb_payoff1=[[None, None], ["1/3", "2/3"]]))
        assert game.absorb_payoff1[1][0] == 1.0 / 3.0
        assert game.absorb_payoff1[1][1] == 2.0 / 3.0

    def test_unknown_field_rejected(self):
        with pytest.raises(SchemaViolation) as exc:
            parse_game_payload(minimal_payload(surprise=1))
        assert any("surprise" in line for line in exc.value.violations)

    def test_probability_out_of_range_located(self):
        with pytest.raises(SchemaViolation) as exc:
            parse_game_payload(minimal_payload(
                absorb_prob=[["0", "1.2"], ["1", "1"]]))
        assert any("absorb_prob[0][1]" in line for line in exc.value.violations)

    def test_unknown_payoff_kind_rejected(self):
        with pytest.raises(SchemaViolation) as exc:
            parse_game_payload(minimal_payload(payoff1={"kind": "entropy"}))
        assert any("payoff1.kind" in line for line in exc.value.violations)

    def test_missing_field_rejected(self):
        doc = minimal_payload()
        del doc["absorb_prob"]
        with pytest.raises(SchemaViolation) as exc:
            parse_game_payload(doc)
        assert any("absorb_prob" in line for line in exc.value.violations)

    def test_profile_indices_checked(self):
        bad = {"kind": "buchi", "profiles": [[0, 5]],
               "hit_payoff": "1", "miss_payoff": "0"}
        with pytest.raises(SchemaViolation) as exc:
            parse_game_payload(minimal_payload(payoff1=bad))
        assert any("profiles[0]" in line for line in exc.value.violations)

    def test_wrong_schema_tag_rejected(self):
        with pytest.raises(SchemaViolation):
            parse_game_payload(minimal_payload(schema="abgames-game-v0"))

    def test_payoff_variants_round_trip(self):
        stage = [["0.25", "1.0"], ["0.0", "0.5"]]
        doc = minimal_payload(
            payoff1={"kind": "limsup_average", "stage_values": stage},
            payoff2={"kind": "cobuchi", "profiles": [[0, 0], [1, 1]],
                     "finite_payoff": "1.0", "infinite_payoff": "0.0",
                     "declared_minmax": "0.25"},
        )
        game = parse_game_payload(doc)
        assert isinstance(game.payoff1, LimsupAverage)
        assert isinstance(game.payoff2, CoBuchi)
        assert game.payoff2.declared_minmax == 0.25
        again = parse_game_payload(json.loads(serialize_game(game)))
        assert serialize_game(again) == serialize_game(game)

    def test_parse_game_reads_fixture_paths(self):
        game = parse_game(str(bundled_fixture("exabs.game")))
        assert game.name == "exit_choice"
        assert isinstance(game.payoff1, CoBuchi)


class TestCommands:
    def run(self, *argv):
        return main(list(argv))

    def test_solve_quit_example(self, capsys):
        code = self.run("solve", str(bundled_fixture("exabs.game")))
        out = capsys.readouterr().out
        assert code == 0
        assert "v1 = 0.000000" in out and "v2 = 0.500000" in out

    def test_solve_matrix_game(self, tmp_path, capsys):
        out_file = tmp_path / "solve.json"
        code = self.run("solve", str(bundled_fixture("matrix2x2.game")),
                        "--out", str(out_file))
        assert code == 0
        rep = json.loads(out_file.read_text())
        assert rep["schema"] == "abgames-report-v1"
        assert rep["minmax"]["v1"] == pytest.approx(0.1, abs=1e-9)
        assert rep["minmax"]["v2"] == pytest.approx(0.1, abs=1e-9)

    def test_solve_big_match_value(self, tmp_path):
        out_file = tmp_path / "bm.json"
        code = self.run("solve", str(bundled_fixture("bigmatch.game")),
                        "--out", str(out_file))
        assert code == 0
        rep = json.loads(out_file.read_text())
        assert rep["minmax"]["v1"] == pytest.approx(0.5, abs=1e-6)

    def test_classify_quit_example(self, tmp_path, capsys):
        out_file = tmp_path / "cls.json"
        code = self.run("classify", str(bundled_fixture("exabs.game")),
                        "--epsilon", "0.1", "--out", str(out_file))
        assert code == 0
        assert "case1" in capsys.readouterr().out
        rep = json.loads(out_file.read_text())
        case = rep["classification"]["case"]
        assert case["tag"] == "case1"
        assert case["detail"]["x0"] == {"x1": [0.0, 1.0], "x2": [0.0, 1.0]}
        assert case["ledger"]["case1"]["holds"] is True
        assert rep["input"]["sha256"] == __import__("hashlib").sha256(
            bundled_fixture("exabs.game").read_bytes()).hexdigest()

    def test_classify_difficult_case_exits_three(self, tmp_path):
        out_file = tmp_path / "hard.json"
        code = self.run("classify", str(bundled_fixture("stubborn.game")),
                        "--epsilon", "0.05", "--out", str(out_file))
        assert code == 3
        rep = json.loads(out_file.read_text())
        assert rep["classification"]["case"]["tag"] == "case3hard"
        assert rep["classification"]["case"]["detail"]["evidence"]

    def test_classify_no_exit_game_is_difficult(self):
        code = self.run("classify", str(bundled_fixture("noexit.game")),
                        "--epsilon", "0.1")
        assert code == 3

    def test_classify_nonabsorbing_exit_fixture(self, tmp_path):
        out_file = tmp_path / "c2.json"
        code = self.run("classify", str(bundled_fixture("delayedexit.game")),
                        "--epsilon", "0.125", "--out", str(out_file))
        assert code == 0
        rep = json.loads(out_file.read_text())
        case = rep["classification"]["case"]
        assert case["tag"] == "case2"
        assert case["detail"]["player"] == 1 and case["detail"]["action"] == 1

    def test_build_verify_quit_example(self, tmp_path, capsys):
        out_file = tmp_path / "bv.json"
        code = self.run("build-verify", str(bundled_fixture("exabs.game")),
                        "--epsilon", "0.1", "--runs", "500", "--out", str(out_file))
        assert code == 0
        assert "certified-within-family" in capsys.readouterr().out
        rep = json.loads(out_file.read_text())
        assert rep["certificate"]["verdict"] == "certified-within-family"
        assert max(rep["certificate"]["gains"]) <= 0.2 + 1e-6
        assert rep["exact"]["payoffs"] == [0.0, 1.0]
        assert rep["profile"]["tag"] == "case1"
        assert rep["simulation"]["runs"] == 500

    def test_build_verify_reports_reproduce(self, tmp_path):
        args = ("build-verify", str(bundled_fixture("exabs.game")),
                "--epsilon", "0.1", "--runs", "300", "--seed", "11")
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        assert self.run(*args, "--out", str(first)) == 0
        assert self.run(*args, "--out", str(second)) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_build_verify_difficult_case_exits_three(self, tmp_path):
        out_file = tmp_path / "hard.json"
        code = self.run("build-verify", str(bundled_fixture("stubborn.game")),
                        "--epsilon", "0.05", "--out", str(out_file))
        assert code == 3
        rep = json.loads(out_file.read_text())
        assert "profile" not in rep
        assert rep["classification"]["case"]["detail"]["evidence"]

    def test_build_verify_uncertifiable_punisher_exits_four(self, capsys):
        code = self.run("build-verify", str(bundled_fixture("bigmatch.game")),
                        "--epsilon", "0.1")
        assert code == 4

    def test_build_verify_family_selection(self, tmp_path):
        out_file = tmp_path / "fam.json"
        code = self.run("build-verify", str(bundled_fixture("exabs.game")),
                        "--epsilon", "0.1", "--runs", "300",
                        "--families", "pure,comply", "--out", str(out_file))
        assert code == 0
        rep = json.loads(out_file.read_text())
        assert rep["certificate"]["families"] == ["PureStationary", "ComplyThenDeviate"]

    def test_simulate_matches_exact_payoffs(self, tmp_path):
        out_file = tmp_path / "sim.json"
        code = self.run("simulate", str(bundled_fixture("delayedexit.game")),
                        "--epsilon", "0.125", "--runs", "2000", "--seed", "7",
                        "--out", str(out_file))
        assert code == 0
        rep = json.loads(out_file.read_text())
        means = rep["simulation"]["payoff_means"]
        assert means[0] == pytest.approx(0.375, abs=0.02)
        assert means[1] == pytest.approx(0.9, abs=0.02)

    def test_usage_errors_exit_one(self):
        assert self.run("classify", str(bundled_fixture("exabs.game"))) == 1
        assert self.run("solve", "/nonexistent/nowhere.game") == 1
        assert self.run("build-verify", str(bundled_fixture("exabs.game")),
                        "--epsilon", "0.1", "--families", "psychic") == 1
        assert self.run("solve", str(bundled_fixture("exabs.game")),
                        "--lambda-schedule", "abc") == 1

    def test_schema_errors_exit_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.game"
        doc = minimal_payload(absorb_prob=[["0", "1.2"], ["1", "1"]])
        bad.write_text(json.dumps(doc))
        assert self.run("solve", str(bad)) == 1
        err = capsys.readouterr().err
        assert "absorb_prob[0][1]" in err

    def test_console_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "abgames.cli", "solve",
             str(bundled_fixture("matrix2x2.game"))],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "v1 = 0.100000" in proc.stdout
