"""Config resolution and the command-line workflows."""

import csv
import json
import os

import numpy as np
import pytest

from adagraph.cli import main
from adagraph.config import ExperimentConfig, parse_config, write_resolved
from adagraph.errors import ConfigError

FAST = [
    "--set", "n_domains=6", "--set", "samples_per_domain=96",
    "--set", "epochs_stage1=6",
]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- parse_config ------------------------------------------------------------

def test_defaults_match_reference_hyperparameters():
    cfg = parse_config()
    assert cfg.sigma == 0.1
    assert cfg.lambda_entropy == 1.0
    assert cfg.buffer_capacity == 16
    assert cfg.buffer_alpha == 0.1
    assert cfg.batch_size == 16
    assert cfg.gbn_momentum == 0.1
    assert cfg.epochs_stage2 == 1
    assert cfg.lr_stage2 == pytest.approx(cfg.lr_stage1 / 10.0)


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        parse_config(overrides={"sigma": -1.0})
    with pytest.raises(ConfigError):
        parse_config(overrides={"bogus_key": 1})
    with pytest.raises(ConfigError):
        parse_config(overrides={"batch_size": "many"})
    with pytest.raises(ConfigError):
        parse_config(overrides={"figures": 1})  # bool field, not int


def test_config_precedence_flags_over_file_over_defaults(tmp_path):
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps({"sigma": 0.3, "n_domains": 9}))
    cfg = parse_config(str(f), overrides={"sigma": 0.7})
    assert cfg.sigma == 0.7        # flag wins
    assert cfg.n_domains == 9      # file wins over default
    assert cfg.batch_size == 16    # default


def test_config_lambda_alias_roundtrip(tmp_path):
    cfg = parse_config(overrides={"lambda": 2.0})
    assert cfg.lambda_entropy == 2.0
    path = write_resolved(cfg, str(tmp_path))
    doc = json.loads(open(path).read())
    assert doc["lambda"] == 2.0 and "lambda_entropy" not in doc


def test_config_env_seed_fallback(monkeypatch):
    monkeypatch.setenv("ADAGRAPH_SEED", "41")
    assert parse_config().seeds == [41]
    assert parse_config(overrides={"seeds": [3]}).seeds == [3]


def test_experiment_config_derived_views():
    cfg = ExperimentConfig(seeds=[5])
    assert cfg.family_spec().seed == 5
    assert cfg.train_config(7).seed == 7
    assert cfg.kernel().sigma == 0.1


# -- CLI workflows -----------------------------------------------------------

def test_cli_pda_run_directory(tmp_path):
    out = str(tmp_path / "run")
    rc = main(["pda", *FAST, "--out", out, "--seed", "0", "--seed", "1",
               "--variant", "baseline", "--variant", "adagraph_full",
               "--target", "d02"])
    assert rc == 0
    rows = read_csv(os.path.join(out, "results.csv"))
    assert rows[0] == ["source", "target", "variant", "seed", "accuracy",
                       "wall_time_s"]
    # 2 variants x 2 seeds x 1 target
    assert len(rows) == 1 + 4
    variants = {r[2] for r in rows[1:]}
    seeds = {r[3] for r in rows[1:]}
    assert variants == {"baseline", "adagraph_full"} and seeds == {"0", "1"}
    for name in ("resolved_config.json", "checkpoint.json", "train_log.csv",
                 "accuracy.png"):
        assert os.path.exists(os.path.join(out, name)), name


def test_cli_pda_deterministic_results(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert main(["pda", *FAST, "--no-figures", "--out", out,
                     "--variant", "adagraph_bn", "--target", "d03"]) == 0
        rows = read_csv(os.path.join(out, "results.csv"))
        outs.append([r[:5] for r in rows])  # all but wall time
    assert outs[0] == outs[1]


def test_cli_predict_from_metadata(tmp_path):
    out = str(tmp_path / "run")
    assert main(["pda", *FAST, "--no-figures", "--out", out,
                 "--variant", "adagraph_full", "--target", "d02"]) == 0
    pred_csv = str(tmp_path / "pred.csv")
    rc = main(["predict", *FAST,
               "--checkpoint", os.path.join(out, "checkpoint.json"),
               "--metadata", "0.3333333333333333",
               "--out-csv", pred_csv])
    assert rc == 0
    rows = read_csv(pred_csv)
    assert rows[0] == ["p0", "p1", "pred"]
    for row in rows[1:]:
        assert float(row[0]) + float(row[1]) == pytest.approx(1.0, abs=1e-9)
        assert row[2] in ("0", "1")


def test_cli_stream_subcommand(tmp_path):
    out = str(tmp_path / "run")
    assert main(["pda", *FAST, "--no-figures", "--out", out,
                 "--variant", "adagraph_full", "--target", "d02"]) == 0
    # labeled drifting samples: features then label
    from adagraph.benchmark import DomainFamilySpec, drifting_stream
    xs, ys = drifting_stream(DomainFamilySpec(n_domains=6,
                                              samples_per_domain=96),
                             120, 0.0, 60.0, seed=0)
    samples = str(tmp_path / "stream.csv")
    np.savetxt(samples, np.column_stack([xs, ys]), delimiter=",")
    out_csv = str(tmp_path / "stream_out.csv")
    rc = main(["stream", *FAST,
               "--checkpoint", os.path.join(out, "checkpoint.json"),
               "--samples", samples, "--mode", "stats",
               "--out-csv", out_csv])
    assert rc == 0
    rows = read_csv(out_csv)
    assert rows[0] == ["idx", "pred", "label", "correct", "cum_acc"]
    assert len(rows) == 1 + 120


def test_cli_continuous_outputs(tmp_path):
    out = str(tmp_path / "run")
    rc = main(["continuous", *FAST, "--no-figures", "--out", out,
               "--set", "n_stream=96",
               "--variant", "baseline", "--variant", "refine_stats"])
    assert rc == 0
    rows = read_csv(os.path.join(out, "results.csv"))
    assert len(rows) == 1 + 2
    stream = read_csv(os.path.join(out, "stream_refine_stats_s0.csv"))
    assert len(stream) == 1 + 96


def test_cli_sweep_outputs(tmp_path):
    out = str(tmp_path / "run")
    rc = main(["sweep", *FAST, "--no-figures", "--out", out,
               "--target", "d03",
               "--set", "sweep_counts=[1,3]", "--set", "sweep_repeats=2"])
    assert rc == 0
    sweep = read_csv(os.path.join(out, "sweep.csv"))
    assert sweep[0] == ["count", "mean_accuracy", "std_accuracy"]
    assert [r[0] for r in sweep[1:]] == ["1", "3"]
    results = read_csv(os.path.join(out, "results.csv"))
    assert len(results) == 1 + 4  # 2 counts x 2 repeats


def test_cli_error_exit_codes(tmp_path):
    assert main(["pda", "--set", "sigma=-1", "--no-figures",
                 "--out", str(tmp_path / "x")]) == 2
    assert main(["pda", "--set", "bogus=1", "--no-figures",
                 "--out", str(tmp_path / "y")]) == 2
    assert main(["sweep", *FAST, "--no-figures",
                 "--out", str(tmp_path / "z")]) == 2  # sweep without target
