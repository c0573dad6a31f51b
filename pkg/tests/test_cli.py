"""Config loading, command dispatch, exit codes and report encoding."""

import json
import math

import numpy as np
import pytest

from phgeom import cli
from phgeom import expr as E
from phgeom.report import Check, Report, dumps, lower_bound_check, residual_check
from phgeom.structures import flat_structure, integrability_report, perturbed_structure

INOUE = {"family": "inoue_splus", "params": {"N": [[2, 1], [1, 1]], "p": 0, "q": 0, "r": 1, "t": [0.0, 1.0]},
         "samples": 200, "seed": 42, "tol": 1e-9}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


class TestConfig:
    def test_defaults(self, tmp_path):
        cfg = cli.load_config(write(tmp_path, {"family": "torus_ph"}))
        assert (cfg.samples, cfg.seed, cfg.tol) == (200, 42, 1e-9)

    def test_inoue_data_built_at_load(self, tmp_path):
        cfg = cli.load_config(write(tmp_path, INOUE))
        d = cfg.instance.data["inoue"]
        assert d.alpha == pytest.approx((3 + 5 ** 0.5) / 2)
        assert d.c_imag_max < 1e-12

    def test_unknown_family_lists_valid(self, tmp_path):
        with pytest.raises(cli.ConfigError) as info:
            cli.load_config(write(tmp_path, {"family": "k3"}))
        assert info.value.path == "family"
        for name in ("torus_ph", "hopf", "hyperelliptic_pch"):
            assert name in str(info.value)

    def test_parse_error_offset(self, tmp_path):
        with pytest.raises(cli.ConfigError, match=r"offset 10\b"):
            cli.load_config(write(tmp_path, {"family": "torus_ph", "params": {"phi": "sin(2*pi*x"}}))

    @pytest.mark.parametrize("data, path", [
        ({"family": "hopf", "samples": 0}, "samples"),
        ({"family": "hopf", "samples": 2.5}, "samples"),
        ({"family": "hopf", "seed": -1}, "seed"),
        ({"family": "hopf", "seed": 2 ** 64}, "seed"),
        ({"family": "hopf", "tol": 0}, "tol"),
        ({"family": "hopf", "checks": "phe"}, "checks"),
        ({"family": "hopf", "colour": 1}, "colour"),
        ({"family": "hopf", "params": {"a": 0.5}}, "params"),
        ({"family": "hopf", "params": {"radius": 2}}, "params"),
    ])
    def test_schema_errors(self, data, path):
        with pytest.raises(cli.ConfigError) as info:
            cli.validate_config(data)
        assert info.value.path == path

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\"family\": ", encoding="utf-8")
        with pytest.raises(cli.ConfigError, match="line 1"):
            cli.load_config(str(path))

    def test_overrides(self, tmp_path):
        cfg = cli.load_config(write(tmp_path, {"family": "hopf"}), {"samples": 7, "seed": 3})
        assert (cfg.samples, cfg.seed) == (7, 3)


class TestCommands:
    def test_verify_hopf(self):
        r = cli.execute(cli.validate_config({"family": "hopf", "params": {"a": 2}}), "verify")
        assert r.passed and r.classification == "lcPHK"
        assert any("1/2" in n for n in r.notes)

    def test_curvature_walker(self):
        cfg = cli.validate_config({"family": "walker", "params": {"a": "sin(u)", "b": "cos(v)", "c": "u*v"}})
        r = cli.execute(cfg, "curvature")
        ricci = next(c for c in r.checks if c.name == "curvature: Ricci = 0")
        assert ricci.max_residual < 1e-8 and r.passed

    def test_curvature_symmetries_elsewhere(self):
        r = cli.execute(cli.validate_config({"family": "torus_ph", "samples": 20}), "curvature")
        assert r.passed and r.notes[-1].startswith("max |Ricci|")

    def test_ansatz_scan(self):
        r = cli.execute(cli.validate_config({"family": "inoue_s0"}), "ansatz-scan")
        dist = next(c for c in r.checks if c.name == "ansatz: dist(b, pi Z)")
        value = float(dist.note.split("value=")[1].split()[0])
        assert r.passed and value > 0.1

    def test_ansatz_scan_other_family_is_error(self):
        r = cli.execute(cli.validate_config({"family": "hopf", "samples": 5}), "ansatz-scan")
        assert not r.passed and r.checks[-1].name == "error: CatalogError"

    def test_classify(self):
        r = cli.execute(cli.validate_config({"family": "kodaira", "params": {"mode": "phk"}}), "classify")
        assert r.classification == "PHK"
        r = cli.execute(cli.validate_config({"family": "hyperelliptic_pch"}), "classify")
        assert r.classification == "ParaHypercomplex"
        r = cli.execute(cli.validate_config({"family": "inoue_s0"}), "classify")
        assert r.classification is None

    def test_check_filter(self):
        r = cli.execute(cli.validate_config({"family": "hopf", "checks": ["phe:"]}), "verify")
        assert r.checks and all(c.name.startswith("phe:") for c in r.checks)

    def test_failing_deformation_records_worst_point(self):
        cfg = cli.validate_config({"family": "hopf", "params": {"phi": "z1*conj(z1)"}, "samples": 50})
        r = cli.execute(cfg, "verify")
        bad = [c for c in r.checks if not c.passed and c.worst_point is not None]
        assert not r.passed and bad
        pts = cfg.instance.sample(50, 42)
        assert any(np.isclose(pts, c.worst_point).all(axis=1).any() for c in bad)


class TestMain:
    def test_list_families(self, capsys):
        assert cli.main(["list-families"]) == 0
        assert capsys.readouterr().out.split() == list(cli.C.FAMILIES)

    def test_exit_zero(self, tmp_path):
        out = tmp_path / "r.json"
        assert cli.main(["verify", "--config", write(tmp_path, INOUE), "--out", str(out)]) == 0
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["classification"] == "lcPHK"
        assert all(c["pass"] for c in report["checks"])

    def test_exit_one(self, tmp_path, capsys):
        cfg = write(tmp_path, {"family": "hopf", "params": {"phi": "z1*conj(z1)"}, "samples": 20})
        assert cli.main(["verify", "--config", cfg]) == 1
        assert '"pass": false' in capsys.readouterr().out

    def test_exit_two(self, tmp_path, capsys):
        assert cli.main(["verify", "--config", write(tmp_path, {"family": "k3"})]) == 2
        assert "valid families" in capsys.readouterr().err
        assert cli.main(["verify"]) == 2
        assert cli.main(["verify", "--config", str(tmp_path / "missing.json")]) == 2

    def test_byte_identical(self, tmp_path):
        cfg = write(tmp_path, INOUE)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        cli.main(["verify", "--config", cfg, "--out", str(a)])
        cli.main(["verify", "--config", cfg, "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_report(self, tmp_path):
        cfg = write(tmp_path, {"family": "elliptic", "samples": 10})
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        cli.main(["verify", "--config", cfg, "--out", str(a)])
        cli.main(["verify", "--config", cfg, "--seed", "43", "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()


class TestReport:
    def test_float_format_and_key_order(self):
        text = dumps({"b": 0.1, "a": [1, None, True], "c": math.inf})
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert "1.000000000000e-01" in text and '"inf"' in text

    def test_pass_iff_below_tolerance(self):
        assert Check("x", 0.5e-9, 1e-9).passed
        assert not Check("x", 1e-9, 1e-9).passed
        assert not Check("x", math.nan, 1.0).passed

    def test_lower_bound_semantics(self):
        assert lower_bound_check("b", 2.0, 0.1, 1e-9).max_residual == 0
        c = lower_bound_check("b", 0.05, 0.1, 1e-9)
        assert c.max_residual == pytest.approx(0.05) and not c.passed

    def test_perturbed_s_worst_point_is_argmax(self):
        pts = np.random.default_rng(0).uniform(0, 1, (25, 4))
        ZW = E.Chart(("x", "y", "u", "v"), (("z", "x", "y"), ("w", "u", "v")))
        s = perturbed_structure(flat_structure(ZW), E.parse_expression("sin(2*pi*x) + 0.5*cos(2*pi*u)", ZW))
        ns = next(c for c in integrability_report(s, pts) if c.name == "integrability: N_S = 0")
        assert not ns.passed and ns.worst_point is not None
        per_point = s.triple.nijenhuis_residuals(pts)["N_S"]
        np.testing.assert_array_equal(ns.worst_point, pts[np.argmax(per_point)])
        r = Report("perturbed", checks=[ns])
        assert json.loads(dumps(r.to_json()))["checks"][0]["worst_point"] == pytest.approx(list(ns.worst_point))

    def test_residual_check_nonfinite(self):
        c = residual_check("x", np.array([0.0, np.inf]), np.zeros((2, 4)), 1.0)
        assert c.max_residual == math.inf and not c.passed
