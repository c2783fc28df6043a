import pandas as pd
import pytest

from src.cli import EXIT_FAILURES, EXIT_OK, EXIT_USAGE, build_parser, main
from src.tools.synthetic import clustered_fraud, write_csv


@pytest.fixture
def data_path(tmp_path):
    return write_csv(clustered_fraud(n=240, fraud_rate=0.05, seed=4), tmp_path / "train.csv")


def write_sweep_config(tmp_path):
    path = tmp_path / "sweep.env"
    path.write_text("roster=NB,KNN\nrules=OR\nsearch=false\nselect_features=false\nfolds=3\n")
    return path


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def test_parser_accepts_repeated_and_comma_separated_k():
    args = build_parser().parse_args(["mixed", "--seed", "3", "--k", "2,3", "--k", "5"])
    assert args.command == "mixed"
    assert args.k == ["2,3", "5"]


def test_subcommand_is_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def test_flat_sweep_succeeds(data_path, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["flat", "--config", str(write_sweep_config(tmp_path)), "--data", str(data_path),
                 "--seed", "2", "--out", str(out)])
    assert code == EXIT_OK
    assert (out / "report_flat.csv").exists()
    assert "manifest.json" in capsys.readouterr().out


def test_mixed_sweep_writes_requested_k(data_path, tmp_path):
    out = tmp_path / "out"
    code = main(["mixed", "--config", str(write_sweep_config(tmp_path)), "--data", str(data_path),
                 "--seed", "2", "--k", "2", "--out", str(out)])
    assert code == EXIT_OK
    assert (out / "report_mixed_k2.csv").exists()
    assert not (out / "report_mixed_k3.csv").exists()


def test_sweep_without_seed_is_a_usage_error(data_path, tmp_path):
    assert main(["flat", "--data", str(data_path), "--out", str(tmp_path)]) == EXIT_USAGE


def test_non_integer_k_is_a_usage_error(data_path, tmp_path):
    assert main(["mixed", "--data", str(data_path), "--seed", "1", "--k", "two"]) == EXIT_USAGE


def test_missing_dataset_exits_with_failures(tmp_path):
    code = main(["flat", "--data", str(tmp_path / "absent.csv"), "--seed", "1", "--out", str(tmp_path / "out")])
    assert code == EXIT_FAILURES
    assert (tmp_path / "out" / "manifest.json").exists()


# ---------------------------------------------------------------------------
# Utility commands
# ---------------------------------------------------------------------------


def test_enumerate_prints_the_composition_table(tmp_path, capsys):
    code = main(["enumerate", "--rule", "MV", "--roster", "NB,KNN,LR", "--out", str(tmp_path)])
    assert code == EXIT_OK
    printed = capsys.readouterr().out.splitlines()
    assert printed == ["index,rule,label,members", "1,MV,CC-MV 1,NB KNN LR"]
    assert (tmp_path / "ensembles.csv").exists()


def test_metrics_command(tmp_path, capsys):
    path = tmp_path / "preds.csv"
    pd.DataFrame({"predicted": [1, 1, 0, 0], "actual": [1, 0, 1, 0]}).to_csv(path, index=False)
    assert main(["metrics", "--predictions", str(path)]) == EXIT_OK
    assert "tp=1 tn=1 fp=1 fn=1 f1=0.500000" in capsys.readouterr().out


def test_metrics_command_rejects_missing_column(tmp_path):
    path = tmp_path / "preds.csv"
    pd.DataFrame({"guess": [1], "actual": [1]}).to_csv(path, index=False)
    assert main(["metrics", "--predictions", str(path)]) == EXIT_USAGE


def test_synthetic_command_writes_a_loadable_csv(tmp_path):
    assert main(["synthetic", "--kind", "separable", "--seed", "3", "--n", "50", "--out", str(tmp_path)]) == EXIT_OK
    frame = pd.read_csv(tmp_path / "synthetic_separable_seed3.csv")
    assert list(frame.columns) == ["V1", "V2", "Class"]
    assert len(frame) == 50


def test_select_features_command(data_path, tmp_path, capsys):
    out = tmp_path / "fs"
    assert main(["select-features", "--data", str(data_path), "--seed", "1", "--out", str(out)]) == EXIT_OK
    table = pd.read_csv(out / "feature_selection.csv")
    assert list(table["feature_name"]) == ["V1", "V2", "V3", "V4"]
    assert "relevant" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# Saved models
# ---------------------------------------------------------------------------


def test_saved_models_score_a_new_file(data_path, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["flat", "--config", str(write_sweep_config(tmp_path)), "--data", str(data_path),
                 "--seed", "2", "--out", str(out), "--save-models"])
    assert code == EXIT_OK
    assert sorted(p.name for p in (out / "models").iterdir()) == ["KNN.joblib", "NB.joblib"]
    capsys.readouterr()

    fresh = write_csv(clustered_fraud(n=120, fraud_rate=0.05, seed=9), tmp_path / "fresh.csv")
    code = main(["predict", "--models", str(out / "models"), "--data", str(fresh), "--out", str(tmp_path / "scored")])
    assert code == EXIT_OK
    assert "NB" in capsys.readouterr().out

    frame = pd.read_csv(tmp_path / "scored" / "predictions.csv")
    assert list(frame.columns) == ["NB", "KNN", "actual"]
    assert len(frame) == 120
    assert set(frame["NB"]) <= {0, 1}


def test_predict_rejects_models_that_disagree_with_tuned_specs(data_path, tmp_path):
    out = tmp_path / "out"
    main(["flat", "--config", str(write_sweep_config(tmp_path)), "--data", str(data_path),
          "--seed", "2", "--out", str(out), "--save-models"])
    tuned = out / "tuned_models.txt"
    tuned.write_text(tuned.read_text().replace("seed=2", "seed=5"))
    assert main(["predict", "--models", str(out / "models"), "--data", str(data_path)]) == EXIT_USAGE


def test_predict_without_saved_models_is_a_usage_error(data_path, tmp_path):
    assert main(["predict", "--models", str(tmp_path), "--data", str(data_path)]) == EXIT_USAGE


def test_sweep_reuses_tuned_specs_from_an_earlier_run(data_path, tmp_path):
    first = tmp_path / "first"
    main(["flat", "--config", str(write_sweep_config(tmp_path)), "--data", str(data_path),
          "--seed", "2", "--out", str(first)])
    second = tmp_path / "second"
    code = main(["flat", "--config", str(write_sweep_config(tmp_path)), "--data", str(data_path),
                 "--seed", "2", "--out", str(second), "--specs", str(first / "tuned_models.txt")])
    assert code == EXIT_OK
    assert (second / "tuned_models.txt").read_text() == (first / "tuned_models.txt").read_text()
    assert (second / "report_flat.csv").read_bytes() == (first / "report_flat.csv").read_bytes()
