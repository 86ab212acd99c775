import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import yaml

from palettemc import SampleStore, ValidationError
from palettemc.cli import exit_code_for, main
from palettemc.config import (config_from_dict, config_to_dict, load_config,
                              build_model_set, save_config, validate_config)
from palettemc.dataio import (emit_report, load_chain_csv, load_dataset_csv,
                              load_report_json, load_store_csv,
                              render_report_text, report_from_dict,
                              report_to_dict, save_report_json, write_store_csv,
                              write_trace_csvs)
from palettemc.errors import DegeneracyError
from palettemc.examples import binomial_config
from palettemc.postprocess import PosteriorReport
from palettemc.run import run_example


SMALL_OVERRIDES = {
    "stage1": {"iterations": 8000},
    "stage2": {"iterations": 8000, "draws_per_model": 8000},
}


@pytest.fixture(scope="module")
def small_report():
    return run_example("binomial", overrides=SMALL_OVERRIDES, write=False)


def write_pine_like_csv(path, n=42, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(50, 5, size=n)
    z = x - rng.normal(2, 1, size=n)
    y = 3000 + 185 * (x - x.mean()) + rng.normal(0, 300, size=n)
    lines = ["y,x,z"] + [f"{y[i]:.3f},{x[i]:.3f},{z[i]:.3f}" for i in range(n)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestLoadDatasetCsv:
    def test_loads_and_centers(self, tmp_path):
        path = write_pine_like_csv(tmp_path / "pine.csv")
        data = load_dataset_csv(path, "y", ["x", "z"], center=["x", "z"])
        assert data.n == 42
        assert data.covariates.shape == (42, 2)
        np.testing.assert_allclose(data.covariates.mean(axis=0), [0.0, 0.0],
                                   atol=1e-9)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("y,x\n1,2\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="missing column 'z'"):
            load_dataset_csv(path, "y", ["x", "z"])

    def test_non_numeric_cell_locates_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("y,x\n1,2\n1,oops\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="row 2, column 'x'"):
            load_dataset_csv(path, "y", ["x"])

    def test_empty_data_section(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("y,x\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="no records"):
            load_dataset_csv(path, "y", ["x"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="not found"):
            load_dataset_csv(tmp_path / "nope.csv", "y", ["x"])


class TestLoadChainCsv:
    def test_accepts_matching_columns(self, tmp_path):
        path = tmp_path / "chain.csv"
        path.write_text("a,b,s2\n1.0,2.0,0.5\n1.1,2.1,0.6\n", encoding="utf-8")
        chain, hyper, names = load_chain_csv(path, 3)
        assert chain.shape == (2, 3)
        assert hyper is None
        assert names == ["a", "b", "s2"]

    def test_optional_hyper_column(self, tmp_path):
        path = tmp_path / "chain.csv"
        path.write_text("b0,V\n0.1,1.5\n0.2,1.7\n", encoding="utf-8")
        chain, hyper, _ = load_chain_csv(path, 1)
        np.testing.assert_allclose(hyper, [1.5, 1.7])

    def test_nan_rejected_with_row_index(self, tmp_path):
        path = tmp_path / "chain.csv"
        path.write_text("a\n1.0\nnan\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="row 2"):
            load_chain_csv(path, 1)

    def test_extra_column_named(self, tmp_path):
        path = tmp_path / "chain.csv"
        path.write_text("a,b,c,extra\n1,2,3,4\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="'extra'"):
            load_chain_csv(path, 3)


class TestStoreRoundTrip:
    def test_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        store = SampleStore(2, rng.normal(size=(20, 3)), rng.gamma(2, size=20))
        path = write_store_csv(store, tmp_path / "store.csv")
        back = load_store_csv(path, 2, 3)
        np.testing.assert_array_equal(back.psi_draws, store.psi_draws)
        np.testing.assert_array_equal(back.hyper_draws, store.hyper_draws)


class TestConfigRoundTrip:
    def test_dict_round_trip_is_identity(self):
        config = binomial_config()
        again = config_from_dict(config_to_dict(config))
        assert again == config

    def test_file_round_trip_is_identity(self, tmp_path):
        config = binomial_config()
        path = save_config(config, tmp_path / "config.yaml")
        loaded = load_config(path)
        assert loaded == config
        save_config(loaded, tmp_path / "config2.yaml")
        assert (tmp_path / "config.yaml").read_text() == (tmp_path / "config2.yaml").read_text()

    def test_weights_renormalized_with_warning(self):
        config = binomial_config()
        models = list(config_to_dict(config)["models"])
        models[0]["prior_weight"] = 0.5
        models[1]["prior_weight"] = 0.6
        payload = config_to_dict(config)
        payload["models"] = models
        with pytest.warns(RuntimeWarning, match="renormalizing"):
            specs = build_model_set(config_from_dict(payload))
        assert sum(m.prior_weight for m in specs) == pytest.approx(1.0, abs=1e-12)

    def test_bad_bijection_rejected(self):
        payload = config_to_dict(binomial_config())
        payload["models"][1]["bijection"] = [[1.0, 1.0], [1.0, 1.0]]
        with pytest.raises(ValidationError, match="singular"):
            build_model_set(config_from_dict(payload))

    def test_unknown_family_rejected(self):
        payload = config_to_dict(binomial_config())
        payload["models"][0]["param_prior"] = {"family": "cauchy"}
        with pytest.raises(ValidationError, match="cauchy"):
            build_model_set(config_from_dict(payload))

    def test_missing_data_file_rejected(self, tmp_path):
        payload = config_to_dict(binomial_config())
        payload["data"] = {"path": str(tmp_path / "nope.csv"), "response": "y",
                           "covariates": ["x"]}
        with pytest.raises(ValidationError, match="not found"):
            validate_config(config_from_dict(payload))


class TestReportEmission:
    def test_text_contains_pairwise_factors_and_rounded_summary(self, small_report):
        text = render_report_text(small_report)
        assert "BF_21" in text
        assert "0.66" in text
        assert "Posterior model probabilities" in text

    def test_trace_csv_shape(self, small_report, tmp_path):
        paths = write_trace_csvs(small_report, tmp_path)
        assert len(paths) == 2
        lines = paths[0].read_text().splitlines()
        assert lines[0] == "iteration,model_1,model_2"
        iterations = [int(line.split(",")[0]) for line in lines[1:]]
        assert iterations == list(range(1, len(iterations) + 1))

    def test_empty_trace_rejected(self, small_report):
        report = replace(small_report, cumulative_trace=np.empty((1, 0, 2)))
        with pytest.raises(ValidationError, match="no post-burn-in iterations"):
            write_trace_csvs(report, ".")

    def test_emit_writes_requested_formats(self, small_report, tmp_path):
        paths = emit_report(small_report, tmp_path, formats=("text", "csv", "json"))
        names = {p.name for p in paths}
        assert "report.txt" in names
        assert "report_probabilities.csv" in names
        assert "report_bayes_factors.csv" in names
        assert "report_transition.csv" in names
        assert "report.json" in names

    def test_report_without_estimates_rejected(self):
        empty = PosteriorReport(("a",), np.array([1.0]), np.array([1.0]))
        with pytest.raises(ValidationError, match="no estimates"):
            emit_report(empty, ".")

    def test_json_round_trip(self, small_report, tmp_path):
        path = save_report_json(small_report, tmp_path / "report.json")
        back = load_report_json(path)
        np.testing.assert_array_equal(back.probs_rao_blackwell,
                                      small_report.probs_rao_blackwell)
        np.testing.assert_array_equal(back.transition.matrix,
                                      small_report.transition.matrix)
        np.testing.assert_array_equal(back.cumulative_trace,
                                      small_report.cumulative_trace)
        assert back.model_names == small_report.model_names
        assert back.seed == small_report.seed

    def test_dict_round_trip_handles_missing_sections(self):
        payload = {
            "model_names": ["a", "b"],
            "prior_weights_used": [0.5, 0.5],
            "sampling_weights": [0.5, 0.5],
            "probs_stationary": [0.4, 0.6],
        }
        report = report_from_dict(payload)
        assert report.probs_indicator is None
        again = report_from_dict(report_to_dict(report))
        np.testing.assert_array_equal(again.probs_stationary, report.probs_stationary)


class TestDeterminism:
    def test_same_config_same_bytes(self, tmp_path):
        run_example("binomial", overrides=SMALL_OVERRIDES,
                    output_dir=tmp_path / "a")
        run_example("binomial", overrides=SMALL_OVERRIDES,
                    output_dir=tmp_path / "b")
        for name in ("report.txt", "report.json", "trace_chain1.csv",
                     "trace_chain2.csv", "report_probabilities.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes(), name


class TestCli:
    def test_example_binomial(self, tmp_path, capsys):
        code = main(["example", "binomial", "--iters", "4000",
                     "--stage1-iters", "4000", "--output-dir", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "BF_21" in out
        assert (tmp_path / "report.txt").exists()
        assert (tmp_path / "trace_chain1.csv").exists()

    def test_example_pine_without_data_fails_with_schema(self, capsys):
        code = main(["example", "pine"])
        assert code == 1
        err = capsys.readouterr().err
        assert "'y'" in err and "'x'" in err and "'z'" in err

    def test_example_trout_without_data_fails_with_schema(self, capsys):
        code = main(["example", "trout"])
        assert code == 1
        err = capsys.readouterr().err
        assert "'y'" in err and "'S'" in err and "'L'" in err

    def test_fit_then_weigh(self, tmp_path, capsys):
        config = binomial_config()
        config = replace(config,
                         stage1=dict(config.stage1, iterations=4000),
                         stage2=dict(config.stage2, iterations=4000,
                                     draws_per_model=4000),
                         output_dir=str(tmp_path / "out"))
        config_path = save_config(config, tmp_path / "config.yaml")
        stores_dir = tmp_path / "stores"
        assert main(["fit", "--config", str(config_path),
                     "--output-dir", str(stores_dir)]) == 0
        assert (stores_dir / "store_model1.csv").exists()
        assert (stores_dir / "store_model2.csv").exists()
        assert main(["weigh", "--config", str(config_path),
                     "--stores", str(stores_dir), "--method", "both",
                     "--output-dir", str(tmp_path / "weigh")]) == 0
        assert (tmp_path / "weigh" / "report.json").exists()

    def test_weigh_external_theta_chain(self, tmp_path):
        # stage 1 skipped entirely: both stores come from CSV chains
        rng = np.random.default_rng(0)
        chain1 = np.column_stack([rng.beta(9, 13, 2000), rng.beta(17, 15, 2000)])
        path1 = tmp_path / "chain1.csv"
        path1.write_text("p1,p2\n" + "\n".join(f"{a},{b}" for a, b in chain1),
                         encoding="utf-8")
        chain2 = rng.beta(25, 27, 2000)[:, None]
        path2 = tmp_path / "chain2.csv"
        path2.write_text("rate\n" + "\n".join(str(v) for v in chain2[:, 0]),
                         encoding="utf-8")
        payload = config_to_dict(binomial_config())
        payload["models"][0]["chain"] = {"path": str(path1), "kind": "theta"}
        payload["models"][1]["chain"] = {"path": str(path2), "kind": "theta"}
        payload["stage2"] = dict(payload["stage2"], iterations=4000,
                                 draws_per_model=4000)
        config_path = tmp_path / "config.yaml"
        config_path.write_text(yaml.safe_dump(payload), encoding="utf-8")
        stores_dir = tmp_path / "stores"
        assert main(["fit", "--config", str(config_path),
                     "--output-dir", str(stores_dir)]) == 0
        assert main(["weigh", "--config", str(config_path),
                     "--stores", str(stores_dir),
                     "--output-dir", str(tmp_path / "out")]) == 0
        report = load_report_json(tmp_path / "out" / "report.json")
        assert abs(report.probs_rao_blackwell[1] - 0.658) < 0.05

    def test_report_verb_round_trip(self, tmp_path, small_report, capsys):
        path = save_report_json(small_report, tmp_path / "r.json")
        code = main(["report", "--input", str(path), "--format", "text",
                     "--output-dir", str(tmp_path)])
        assert code == 0
        assert "BF_21" in capsys.readouterr().out

    def test_unknown_verb_exits_1(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_missing_config_exits_1(self, capsys):
        assert main(["fit", "--config", "/nonexistent.yaml"]) == 1

    def test_exit_code_mapping(self):
        assert exit_code_for(ValidationError("x")) == 1
        assert exit_code_for(DegeneracyError("x")) == 2
        assert exit_code_for(OSError("x")) == 3
        with pytest.raises(KeyError):
            exit_code_for(KeyError("x"))
