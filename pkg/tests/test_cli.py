import json

import numpy as np
import pytest

from mixedbn import InternalError, load_dataset
from mixedbn.cli import build_parser, load_structure, main


def run_cli(*args):
    return main(list(args))


def simulate(tmp_path, name="sim", n=40, seed=5, random="3,2,2"):
    prefix = tmp_path / name
    rc = run_cli(
        "simulate", "--random", random, "--n", str(n),
        "--seed", str(seed), "--out", str(prefix),
    )
    assert rc == 0
    return prefix


class TestParser:
    def test_requires_command(self):
        assert run_cli() == 2

    def test_unknown_command(self):
        assert run_cli("frobnicate") == 2

    def test_unknown_flag(self):
        assert run_cli("simulate", "--bogus", "1") == 2

    def test_help_exits_zero(self):
        assert run_cli("--help") == 0
        assert run_cli("learn", "--help") == 0

    def test_prog_name(self):
        assert build_parser().prog == "mixedbn"


class TestSimulate:
    def test_outputs_exist_and_parse(self, tmp_path):
        prefix = simulate(tmp_path)
        data = load_dataset(str(prefix) + ".csv")
        assert data.n_cases == 40
        latent = (tmp_path / "sim.latent.csv").read_text().strip().split("\n")
        assert len(latent) == 41
        schema = json.loads((tmp_path / "sim.schema.json").read_text())
        assert [v["name"] for v in schema] == ["x1", "x2", "x3"]
        mechanism = json.loads((tmp_path / "sim.mechanism.json").read_text())
        assert mechanism["schema_version"] == 1
        manifest = json.loads((tmp_path / "sim.manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["seed"] == 5

    def test_zero_cases_is_user_error(self, tmp_path):
        rc = run_cli(
            "simulate", "--random", "2,2,1", "--n", "0",
            "--out", str(tmp_path / "x"),
        )
        assert rc == 2

    def test_malformed_random_spec(self, tmp_path):
        rc = run_cli(
            "simulate", "--random", "3;2;2", "--n", "5",
            "--out", str(tmp_path / "x"),
        )
        assert rc == 2

    def test_mechanism_file_round_trip(self, tmp_path):
        prefix = simulate(tmp_path)
        rc = run_cli(
            "simulate", "--mechanism", str(prefix) + ".mechanism.json",
            "--n", "40", "--seed", "5", "--out", str(tmp_path / "again"),
        )
        assert rc == 0
        first = (tmp_path / "sim.csv").read_bytes()
        second = (tmp_path / "again.csv").read_bytes()
        assert first == second

    def test_deterministic_artifacts(self, tmp_path):
        simulate(tmp_path, name="a")
        simulate(tmp_path, name="b")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (
            (tmp_path / "a.mechanism.json").read_bytes()
            == (tmp_path / "b.mechanism.json").read_bytes()
        )

    def test_data_round_trips_through_repr(self, tmp_path):
        prefix = simulate(tmp_path)
        data = load_dataset(str(prefix) + ".csv")
        latent_lines = (tmp_path / "sim.latent.csv").read_text().strip().split("\n")
        codes = np.array(
            [[int(c) for c in line.split(",")] for line in latent_lines[1:]]
        )
        mechanism = json.loads((tmp_path / "sim.mechanism.json").read_text())
        for i, var in enumerate(mechanism["variables"]):
            thresholds = var["thresholds"]
            lo, hi = var["bounds"]
            from mixedbn import DiscretizationPolicy, apply_policy

            policy = DiscretizationPolicy(
                thresholds=tuple(thresholds), lower=lo, upper=hi
            )
            assert np.array_equal(
                apply_policy(data.column(i), policy), codes[:, i]
            )


class TestDiscretize:
    def test_happy_path(self, tmp_path):
        prefix = simulate(tmp_path)
        out = tmp_path / "fit.json"
        rc = run_cli(
            "discretize", "--data", str(prefix) + ".csv",
            "--schema", str(prefix) + ".schema.json", "--out", str(out),
        )
        assert rc == 0
        policy = json.loads(out.read_text())
        assert policy["schema_version"] == 1
        assert set(policy["variables"]) == {"x1", "x2", "x3"}
        codes_csv = (tmp_path / "fit.data.csv").read_text().strip().split("\n")
        assert codes_csv[0] == "x1,x2,x3"
        assert len(codes_csv) == 41
        manifest = json.loads((tmp_path / "fit.manifest.json").read_text())
        assert manifest["command"] == "discretize"
        assert manifest["search"]["epsilon"] == 1e-6
        assert manifest["search"]["init"] == {"kind": "eqfreq", "r0": 3}
        assert manifest["prior"]["dirichlet_mode"] == "k2"
        assert "total_score" in manifest

    def test_missing_data_file(self, tmp_path):
        rc = run_cli(
            "discretize", "--data", str(tmp_path / "nope.csv"),
            "--out", str(tmp_path / "p.json"),
        )
        assert rc == 2

    def test_flag_conflict(self, tmp_path):
        prefix = simulate(tmp_path)
        rc = run_cli(
            "discretize", "--data", str(prefix) + ".csv",
            "--alpha", "2", "--ess", "4", "--out", str(tmp_path / "p.json"),
        )
        assert rc == 2

    def test_bad_policy_prior(self, tmp_path):
        prefix = simulate(tmp_path)
        rc = run_cli(
            "discretize", "--data", str(prefix) + ".csv",
            "--policy-prior", "zipf", "--out", str(tmp_path / "p.json"),
        )
        assert rc == 2

    def test_bad_init(self, tmp_path):
        prefix = simulate(tmp_path)
        rc = run_cli(
            "discretize", "--data", str(prefix) + ".csv",
            "--init", "kmeans:3", "--out", str(tmp_path / "p.json"),
        )
        assert rc == 2

    def test_poisson_prior_accepted(self, tmp_path):
        prefix = simulate(tmp_path)
        rc = run_cli(
            "discretize", "--data", str(prefix) + ".csv",
            "--policy-prior", "poisson:3.5", "--out", str(tmp_path / "p.json"),
        )
        assert rc == 0
        manifest = json.loads((tmp_path / "p.manifest.json").read_text())
        assert manifest["prior"]["policy_prior"] == "poisson"
        assert manifest["prior"]["poisson_rate"] == 3.5


class TestLearn:
    def test_happy_path(self, tmp_path):
        prefix = simulate(tmp_path)
        rc = run_cli(
            "learn", "--data", str(prefix) + ".csv",
            "--schema", str(prefix) + ".schema.json",
            "--out", str(tmp_path / "fit"),
        )
        assert rc == 0
        for suffix in (
            ".structure.json", ".structure.dot", ".policy.json",
            ".trace.jsonl", ".manifest.json",
        ):
            assert (tmp_path / ("fit" + suffix)).exists()
        structure = json.loads((tmp_path / "fit.structure.json").read_text())
        assert structure["variables"] == ["x1", "x2", "x3"]
        trace_lines = (
            (tmp_path / "fit.trace.jsonl").read_text().strip().split("\n")
        )
        records = [json.loads(line) for line in trace_lines]
        assert records[-1]["kind"] == "termination"
        dot = (tmp_path / "fit.structure.dot").read_text()
        assert dot.startswith("digraph")
        data = load_dataset(str(prefix) + ".csv")
        loaded = load_structure(tmp_path / "fit.structure.json", data)
        assert [
            [structure["variables"][p], structure["variables"][c]]
            for p, c in loaded.edges()
        ] == structure["edges"]

    def test_deterministic_artifacts(self, tmp_path):
        prefix = simulate(tmp_path)
        for name in ("fit1", "fit2"):
            rc = run_cli(
                "learn", "--data", str(prefix) + ".csv",
                "--out", str(tmp_path / name),
            )
            assert rc == 0
        for suffix in (".structure.json", ".policy.json", ".trace.jsonl"):
            assert (
                (tmp_path / ("fit1" + suffix)).read_bytes()
                == (tmp_path / ("fit2" + suffix)).read_bytes()
            )

    def test_internal_error_exit_code(self, tmp_path, monkeypatch):
        prefix = simulate(tmp_path)

        def boom(*args, **kwargs):
            raise InternalError("induced failure")

        monkeypatch.setattr("mixedbn.cli.hill_climb_structure", boom)
        rc = run_cli(
            "learn", "--data", str(prefix) + ".csv",
            "--out", str(tmp_path / "fit"),
        )
        assert rc == 3


class TestScore:
    def fit(self, tmp_path):
        prefix = simulate(tmp_path)
        rc = run_cli(
            "learn", "--data", str(prefix) + ".csv",
            "--out", str(tmp_path / "fit"),
        )
        assert rc == 0
        return prefix

    def test_breakdown_on_stdout(self, tmp_path, capsys):
        prefix = self.fit(tmp_path)
        capsys.readouterr()
        rc = run_cli(
            "score", "--data", str(prefix) + ".csv",
            "--structure", str(tmp_path / "fit.structure.json"),
            "--policy", str(tmp_path / "fit.policy.json"),
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["schema_version"] == 1
        assert len(payload["variables"]) == 3
        manifest = json.loads((tmp_path / "fit.manifest.json").read_text())
        assert payload["total"] == pytest.approx(
            manifest["total_score"], abs=1e-9
        )

    def test_out_file(self, tmp_path, capsys):
        prefix = self.fit(tmp_path)
        capsys.readouterr()
        out = tmp_path / "breakdown.json"
        rc = run_cli(
            "score", "--data", str(prefix) + ".csv",
            "--structure", str(tmp_path / "fit.structure.json"),
            "--policy", str(tmp_path / "fit.policy.json"),
            "--out", str(out),
        )
        assert rc == 0
        stdout = capsys.readouterr().out
        assert json.loads(out.read_text()) == json.loads(stdout)

    def test_structure_variable_mismatch(self, tmp_path):
        prefix = self.fit(tmp_path)
        other = simulate(tmp_path, name="other", random="4,2,2")
        rc = run_cli(
            "score", "--data", str(other) + ".csv",
            "--structure", str(tmp_path / "fit.structure.json"),
            "--policy", str(tmp_path / "fit.policy.json"),
        )
        assert rc == 2

    def test_invalid_policy_json(self, tmp_path):
        prefix = self.fit(tmp_path)
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        rc = run_cli(
            "score", "--data", str(prefix) + ".csv",
            "--structure", str(tmp_path / "fit.structure.json"),
            "--policy", str(bad),
        )
        assert rc == 2
