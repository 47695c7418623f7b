import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import FIXTURES
from iterfe import SpecParseError, SpecValidationError
from iterfe.cli import EXIT_OK, EXIT_SPEC, EXIT_UNDECIDED, EXIT_UNSOLVABLE, main, run
from iterfe.specfile import EquationSpec, load_spec, spec_from_dict, write_spec

ALL_FIXTURES = sorted(p.name for p in FIXTURES.glob("*.json"))


def base_spec(**over):
    d = {
        "system": {"maps": [{"kind": "power", "exponent": 2.0}], "weights": [1.0]},
        "g": {"kind": "closed_form", "coeffs": [0.0, 1.0, -1.0]},
        "grid": {"M": 16, "x_max": 0.9},
    }
    d.update(over)
    return d


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def write(tmp_path, d, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


class TestSpecfile:
    @pytest.mark.parametrize("name", ALL_FIXTURES)
    def test_fixtures_load(self, name):
        assert isinstance(load_spec(FIXTURES / name), EquationSpec)

    @pytest.mark.parametrize("name", ALL_FIXTURES)
    def test_round_trip(self, name, tmp_path):
        spec = load_spec(FIXTURES / name)
        write_spec(spec, tmp_path / "out.json")
        assert load_spec(tmp_path / "out.json") == spec

    def test_defaults(self):
        spec = spec_from_dict(base_spec())
        assert (spec.endpoints.a, spec.endpoints.b) == (0.0, 0.0)
        assert spec.params.tol == 1e-6 and spec.options.command == "solve"

    def test_weights_sum(self):
        d = base_spec(system={"maps": [{"kind": "power", "exponent": 2.0}, {"kind": "identity"}],
                              "weights": [0.6, 0.6]})
        with pytest.raises(SpecValidationError) as info:
            spec_from_dict(d)
        assert any("weights sum 1.2" in p for p in info.value.problems)

    def test_g_must_vanish_at_endpoints(self):
        d = base_spec(g={"kind": "closed_form", "coeffs": [0.1]})
        with pytest.raises(SpecValidationError) as info:
            spec_from_dict(d)
        assert any("g must vanish" in p for p in info.value.problems)

    def test_every_problem_reported(self):
        d = base_spec(g={"kind": "closed_form", "coeffs": [0.1]},
                      params={"method": "magic"}, options={"class": "smooth", "points": [2.0]},
                      extra=1)
        with pytest.raises(SpecValidationError) as info:
            spec_from_dict(d)
        text = " | ".join(info.value.problems)
        for needle in ("g must vanish", "params.method", "options.class", "options.points",
                       "unknown key 'extra'"):
            assert needle in text

    def test_h_endpoint_mismatch(self):
        d = base_spec(h={"kind": "closed_form", "coeffs": [0.0, 1.0]}, endpoints={"a": 0.0, "b": 2.0})
        with pytest.raises(SpecValidationError, match="do not match"):
            spec_from_dict(d)

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(SpecParseError):
            load_spec(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SpecParseError):
            load_spec(tmp_path / "absent.json")


class TestExitCodes:
    def test_solve_dyadic(self, tmp_path):
        assert main(["--spec", str(FIXTURES / "dyadic.json"), "--out", str(tmp_path)]) == EXIT_OK
        rows = read_csv(tmp_path / "results.csv")
        assert rows[0] == ["x", "phi", "status", "residual"]
        xs = np.array([float(r[0]) for r in rows[1:]])
        phi = np.array([float(r[1]) for r in rows[1:]])
        inner = xs < 1.0
        assert np.max(np.abs(phi[inner] - xs[inner])) <= 1e-6 and phi[~inner] == pytest.approx([0.0])
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["exit_code"] == 0 and report["command"] == "solve"

    def test_swap_antisymmetric(self, tmp_path):
        assert main(["--spec", str(FIXTURES / "swap_antisymmetric.json"),
                     "--out", str(tmp_path)]) == EXIT_OK

    def test_unbounded_partial_sums(self, tmp_path):
        code = main(["--spec", str(FIXTURES / "swap_unsolvable.json"), "--out", str(tmp_path)])
        assert code == EXIT_UNSOLVABLE
        fam = json.loads((tmp_path / "report.json").read_text())["g_family"]
        assert fam["unbounded"] and fam["slope"] == pytest.approx(1.0, abs=1e-9)
        seq = fam["worst_sequence"]
        assert seq[:5] == pytest.approx([1.0, 2.0, 3.0, 4.0, 5.0])

    def test_unsolvable_via_solve(self, tmp_path):
        code = main(["--spec", str(FIXTURES / "swap_unsolvable.json"), "--out", str(tmp_path),
                     "--command", "solve"])
        assert code == EXIT_UNSOLVABLE
        assert "error" in json.loads((tmp_path / "report.json").read_text())

    def test_invalid_spec(self, tmp_path, capsys):
        d = base_spec(system={"maps": [{"kind": "power", "exponent": 2.0}, {"kind": "identity"}],
                              "weights": [0.6, 0.6]})
        code = main(["--spec", str(write(tmp_path, d)), "--out", str(tmp_path / "o")])
        assert code == EXIT_SPEC
        assert "weights sum 1.2" in capsys.readouterr().err
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["error"]["kind"] == "validation_error"

    def test_unparseable_spec(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("[")
        assert main(["--spec", str(p), "--out", str(tmp_path / "o")]) == EXIT_SPEC

    def test_undecided(self, tmp_path):
        d = base_spec(system={"maps": [{"kind": "power", "exponent": 1.0001}], "weights": [1.0]},
                      g={"kind": "closed_form", "coeffs": [0.0]},
                      h={"kind": "closed_form", "coeffs": [0.0, 1.0]}, endpoints={"a": 0.0, "b": 1.0},
                      grid={"M": 8})
        spec = str(write(tmp_path, d))
        assert main(["--spec", spec, "--out", str(tmp_path / "a"), "--command", "solve-e0"]) == EXIT_UNDECIDED
        rows = read_csv(tmp_path / "a" / "results.csv")
        assert any(r[2] == "undecided" and r[1] == "nan" for r in rows[1:])
        assert main(["--spec", spec, "--out", str(tmp_path / "b"), "--command", "solve-e0",
                     "--max-undecided", "1.0"]) == EXIT_OK

    def test_simulate(self, tmp_path):
        code = main(["--spec", str(FIXTURES / "martingale.json"), "--out", str(tmp_path),
                     "--mc-samples", "20000"])
        assert code == EXIT_OK
        for x, p, status, hw in read_csv(tmp_path / "results.csv")[1:]:
            assert status == "resolved"
            assert abs(float(p) - float(x)) <= 2 * float(hw)

    def test_verify_command(self, tmp_path):
        assert main(["--spec", str(FIXTURES / "dyadic.json"), "--out", str(tmp_path),
                     "--command", "verify", "--grid-m", "64"]) == EXIT_OK
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["residual_E"] <= 1e-6 and report["hypotheses"]["h1_monotone"]["pass"]

    def test_diagnose_solvable(self, tmp_path):
        assert main(["--spec", str(FIXTURES / "dyadic.json"), "--out", str(tmp_path),
                     "--command", "diagnose", "--grid-m", "32"]) == EXIT_OK
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["bg_sup"] <= 1e-6 and not report["g_family"]["unbounded"]

    def test_overrides_recorded(self, tmp_path):
        main(["--spec", str(FIXTURES / "dyadic.json"), "--out", str(tmp_path),
              "--grid-m", "16", "--tol", "1e-5", "--seed", "9"])
        spec = json.loads((tmp_path / "report.json").read_text())["spec"]
        assert spec["grid"]["M"] == 16 and spec["params"]["tol"] == 1e-5 and spec["params"]["seed"] == 9


class TestDeterminism:
    @pytest.mark.parametrize("name", ["dyadic.json", "martingale.json"])
    def test_worker_count_irrelevant(self, name, tmp_path):
        outs = []
        for w in (1, 4):
            out = tmp_path / f"w{w}"
            main(["--spec", str(FIXTURES / name), "--out", str(out), "--workers", str(w),
                  "--grid-m", "64", "--mc-samples", "5000"])
            outs.append((out / "results.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_run_twice(self, tmp_path):
        spec = load_spec(FIXTURES / "swap_antisymmetric.json")
        run("solve", spec, tmp_path / "a")
        run("solve", spec, tmp_path / "b")
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()

    def test_nan_serialised_as_null(self, tmp_path):
        d = base_spec(system={"maps": [{"kind": "power", "exponent": 1.0001}], "weights": [1.0]},
                      g={"kind": "closed_form", "coeffs": [0.0]}, grid={"M": 4})
        main(["--spec", str(write(tmp_path, d)), "--out", str(tmp_path / "o"),
              "--command", "solve-e0", "--max-undecided", "1"])
        text = (tmp_path / "o" / "report.json").read_text()
        assert "NaN" not in text
        json.loads(text)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "iterfe", "--spec", str(FIXTURES / "dyadic.json"),
                           "--out", str(tmp_path), "--grid-m", "32"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "results.csv").exists()
    assert not math.isnan(float(read_csv(tmp_path / "results.csv")[1][1]))
