import json
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from nilspectra.errors import InfeasibleFitError, ValidityError
from nilspectra.harness import (
    build_model,
    fit_constant,
    load_config,
    parse_config,
    run_count_experiment,
    run_heat_experiment,
    run_sobolev_check,
    run_volume,
    write_report,
)
from nilspectra.harness.cli import run as cli
from oracles import harmonic_count, heisenberg_n0

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "nilspectra" / "configs"


def col(report, name):
    return np.array([row[name] for row in report.rows])


def heisenberg_doc(**over):
    doc = {
        "spec_version": "1",
        "model": {"kind": "builtin", "name": "heisenberg", "parameter": 1.0},
        "lambda_grid": {"min": 4.5, "max": 40.0, "count": 8},
        "t_grid": {"values": [0.5, 1.0, 2.0]},
        "sampling": {"samples": 40_000, "seed": 0},
        "heat": {"cutoff": 40.0},
    }
    for key, value in over.items():
        doc[key] = value
    return doc


class TestFit:
    def test_identity_is_one(self):
        lam = np.geomspace(1, 100, 10)
        assert fit_constant(list(zip(lam, lam)), "count", lambda x: x) == 1.0

    def test_square_root_two(self):
        lam = np.geomspace(1, 100, 10)
        C = fit_constant(list(zip(lam, 2 * lam)), "count", lambda x: x)
        assert C == pytest.approx(math.sqrt(2), rel=1e-3)
        assert C >= math.sqrt(2)

    def test_single_row(self):
        # 4 <= C * (3 C) needs C >= 2/sqrt(3)
        C = fit_constant([(3.0, 4.0)], "count", lambda x: x)
        assert C == pytest.approx(2 / math.sqrt(3), rel=1e-3)

    def test_tabulated_proxy(self):
        lam = np.geomspace(1, 100, 10)
        assert fit_constant(list(zip(lam, lam)), "count", (lam, lam)) == 1.0

    def test_heat_mode(self):
        t = np.array([0.5, 1.0, 2.0])
        Z0 = lambda s: 1.0 / np.asarray(s)  # noqa: E731
        # Z = 2/t: need 2/t <= C * C / t, so C = sqrt(2)
        assert fit_constant(list(zip(t, 2 / t)), "heat", Z0) == pytest.approx(math.sqrt(2), rel=1e-3)

    def test_infeasible_names_row(self):
        with pytest.raises(InfeasibleFitError) as info:
            # a proxy that vanishes everywhere can never dominate a positive count
            fit_constant([(1.0, 0.0), (2.5, 3.0)], "count", lambda x: 0.0 * np.asarray(x))
        assert "2.5" in str(info.value)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            fit_constant([(1.0, 1.0)], "volume", lambda x: x)
        with pytest.raises(ValueError):
            fit_constant([], "count", lambda x: x)
        with pytest.raises(ValueError):
            fit_constant([(-1.0, 1.0)], "count", lambda x: x)


class TestConfig:
    def test_shipped_configs_parse(self):
        for path in CONFIGS.glob("*.toml"):
            cfg = load_config(path)
            build_model(cfg.model)

    def test_version_required(self):
        with pytest.raises(ValueError, match="spec_version"):
            parse_config(heisenberg_doc(spec_version="2"))

    def test_half_specified_grid(self):
        with pytest.raises(ValueError):
            parse_config(heisenberg_doc(grid={"L": 5.0}))

    def test_ceiling_below_one(self):
        with pytest.raises(ValueError):
            parse_config(heisenberg_doc(ceiling_c=0.5))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            parse_config(heisenberg_doc(model={"kind": "spline"}))

    def test_geometric_grid(self):
        cfg = parse_config(heisenberg_doc())
        pts = cfg.lambda_grid.points()
        assert len(pts) == 8 and pts[0] == 4.5 and pts[-1] == pytest.approx(40.0)
        assert np.allclose(np.diff(np.log(pts)), np.log(pts[1] / pts[0]))

    def test_with_parameter(self):
        cfg = parse_config(heisenberg_doc()).with_parameter(4.0)
        assert cfg.parameter == 4.0
        assert build_model(cfg.model).generators[2].b.coeff((0,)) == 4.0

    def test_schrodinger_square_root_checked(self):
        model = {
            "kind": "schrodinger", "n": 1,
            "V": [{"exponents": [2], "coeff": 1.0}],
            "V_square_root": [{"exponents": [1], "coeff": 2.0}],
        }
        with pytest.raises(ValueError):
            build_model(model)

    def test_custom_representation_matches_builtin(self):
        rep = build_model(load_config(CONFIGS / "heisenberg_custom.toml").model)
        assert rep.check_homomorphism(tol=0.0).ok
        assert rep.p == 2 and rep.algebra.strata == (2, 1)

    def test_toml_syntax_error(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("spec_version = \n")
        with pytest.raises(ValueError):
            load_config(bad)


class TestExperiments:
    def test_count_rows(self):
        rep = run_count_experiment(parse_config(heisenberg_doc()))
        lam = col(rep, "lambda")
        N = col(rep, "N")
        N0 = col(rep, "N0")
        np.testing.assert_array_equal(N, harmonic_count(lam))
        assert np.all(np.abs(N0 - heisenberg_n0(lam)) <= 4 * col(rep, "N0_stderr") + 1e-12)
        assert 1.0 <= rep.fitted_C <= 10.0 and rep.passed
        assert rep.columns == ("lambda", "N", "N0", "N0_stderr", "ratio")

    def test_fixed_grid_beyond_validity(self):
        with pytest.raises(ValidityError):
            run_count_experiment(parse_config(heisenberg_doc(grid={"L": 4.0, "m": 41})))

    def test_coarsening_does_not_lower_fit(self):
        fits, allowances = [], []
        for m in (1201, 601):
            rep = run_count_experiment(parse_config(heisenberg_doc(grid={"L": 12.0, "m": m})))
            fits.append(rep.fitted_C)
            allowances.append(max(3 * r["N0_stderr"] / r["N0"] for r in rep.rows if r["N0"] > 0))
        fine, coarse = fits
        assert coarse >= fine * (1 - max(allowances)) - 1e-3 * fine

    def test_heat_monotone(self):
        rep = run_heat_experiment(parse_config(heisenberg_doc()))
        Z = col(rep, "Z")
        Z0 = col(rep, "Z0")
        assert np.all(np.diff(Z) < 0) and np.all(np.diff(Z0) < 0)
        np.testing.assert_allclose(Z, 1 / (2 * np.sinh([0.5, 1.0, 2.0])), rtol=1e-2)
        assert rep.fitted_C >= 1.0

    def test_heat_single_t(self):
        rep = run_heat_experiment(parse_config(heisenberg_doc(t_grid={"values": [1.0]})))
        assert len(rep.rows) == 1 and 1.0 <= rep.fitted_C < 10.0

    def test_volume_only(self):
        rep = run_volume(parse_config(heisenberg_doc()))
        assert rep.fitted_C is None and rep.passed
        assert rep.rows[0]["lambda"] == 4.5

    def test_sobolev_order_zero(self):
        doc = heisenberg_doc(sobolev={"orders": [0], "functions": 5, "m": 256})
        rep = run_sobolev_check(parse_config(doc))
        assert all(r["ratio"] == 1.0 for r in rep.rows)

    def test_report_files(self, tmp_path):
        rep = run_volume(parse_config(heisenberg_doc()))
        csv_path, json_path = write_report(rep, tmp_path, "volume")
        summary = json.loads(json_path.read_text())
        assert set(summary) >= {"fitted_C", "pass", "rows", "provenance"}
        assert csv_path.read_text().splitlines()[0] == ",".join(rep.columns)

    def test_byte_reproducible_csv(self, tmp_path):
        texts = []
        for workers, sub in ((1, "a"), (1, "b"), (3, "c")):
            doc = heisenberg_doc(sampling={"samples": 40_000, "seed": 5, "workers": workers})
            csv_path, _ = write_report(run_count_experiment(parse_config(doc)), tmp_path / sub, "count")
            texts.append(csv_path.read_bytes())
        assert texts[0] == texts[1] == texts[2]


class TestCli:
    @pytest.fixture
    def cfg_path(self, tmp_path):
        path = tmp_path / "h.toml"
        shutil.copy(CONFIGS / "heisenberg_count.toml", path)
        return path

    def test_validate(self, cfg_path, capsys):
        assert cli(["validate", "--config", str(cfg_path)]) == 0
        assert json.loads(capsys.readouterr().out)["valid"] is True

    def test_count_pass_and_fail(self, cfg_path, tmp_path):
        common = ["--config", str(cfg_path), "--out", str(tmp_path / "o"), "--samples", "20000"]
        assert cli(["count", *common]) == 0
        assert (tmp_path / "o" / "count.csv").exists()
        assert cli(["count", *common, "--ceiling-c", "1.0"]) == 1

    def test_degenerate_rejected(self, tmp_path, capsys):
        code = cli(["validate", "--config", str(CONFIGS / "degenerate.toml"), "--out", str(tmp_path)])
        assert code == 2
        assert "0.707" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli(["count", "--config", str(tmp_path / "missing.toml")]) == 2

    def test_dump_matrix(self, cfg_path, tmp_path):
        mtx = tmp_path / "h.mtx"
        code = cli(["count", "--config", str(cfg_path), "--out", str(tmp_path), "--samples", "20000",
                    "--dump-matrix", str(mtx)])
        assert code == 0 and mtx.read_text().startswith("%%MatrixMarket")
