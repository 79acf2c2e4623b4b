"""Command-line entry point: benchmark protocols, prediction and streaming.

Every run directory receives resolved_config.json, a results CSV and (where a
model is trained) checkpoint.json, enough to reproduce the run bitwise.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import benchmark as bm
from . import report
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, parse_config, write_resolved
from .errors import AdaGraphError, ConfigError
from .prediction import (predict_from_image, predict_from_metadata,
                         predict_target, train_metadata_classifier)
from .refinement import RefinementEngine


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path: str, header: list[str], rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _result_rows(results: list[bm.ResultRow]) -> list:
    return [[r.source, r.target, r.variant, r.seed, _fmt(r.accuracy),
             f"{r.wall_time_s:.3f}"] for r in results]


def _pda_targets(cfg: ExperimentConfig, spec: bm.DomainFamilySpec) -> list[str]:
    if cfg.target is not None:
        return [cfg.target]
    src_angle = bm.domain_angle(spec, cfg.source)
    return [d for d in bm.domain_ids(spec)
            if d != cfg.source
            and bm.angular_distance(src_angle, bm.domain_angle(spec, d))
            >= cfg.min_angular_distance]


def cmd_pda(cfg: ExperimentConfig) -> int:
    write_resolved(cfg, cfg.out)
    results: list[bm.ResultRow] = []
    capture: dict = {}
    for seed in cfg.seeds:
        spec = cfg.family_spec(seed)
        tc = cfg.train_config(seed)
        family = bm.generate_family(spec)
        stage1 = bm.train_source_model(spec, cfg.source, tc, family)
        for target in _pda_targets(cfg, spec):
            for variant in cfg.variants:
                capture = {}
                row = bm.run_pda(
                    spec, variant, cfg.source, target, tc, kernel=cfg.kernel(),
                    refine_capacity=cfg.buffer_capacity,
                    refine_alpha=cfg.buffer_alpha, refine_lr=cfg.refine_lr,
                    stage1_net=stage1, family=family, capture=capture)
                results.append(row)
    results_csv = os.path.join(cfg.out, "results.csv")
    _write_csv(results_csv,
               ["source", "target", "variant", "seed", "accuracy", "wall_time_s"],
               _result_rows(results))
    _save_run_checkpoint(cfg, capture)
    if capture.get("log"):
        _write_csv(os.path.join(cfg.out, "train_log.csv"),
                   ["step", "domain", "term", "value"],
                   [[r.step, r.domain, r.term, _fmt(r.value)]
                    for r in capture["log"]])
    if cfg.figures:
        report.render_pda_figure(results_csv)
    print(f"wrote {len(results)} result rows to {results_csv}")
    return 0


def _save_run_checkpoint(cfg: ExperimentConfig, capture: dict) -> None:
    if "net" not in capture:
        return
    clf = class_ids = None
    if capture.get("graph") is not None and capture.get("aux_data"):
        spec = cfg.family_spec(cfg.seeds[-1])
        family = bm.generate_family(spec)
        data = {cfg.source: family[cfg.source][:2]}
        for d in capture["aux_data"]:
            data[d] = family[d][:2]
        clf, class_ids = train_metadata_classifier(
            data, cfg.train_config(cfg.seeds[-1]), hidden=cfg.hidden)
    save_checkpoint(os.path.join(cfg.out, "checkpoint.json"),
                    capture["net"], capture.get("graph"), cfg.source,
                    metadata_classifier=clf, class_ids=class_ids)


def cmd_continuous(cfg: ExperimentConfig) -> int:
    write_resolved(cfg, cfg.out)
    variants = [v for v in cfg.variants if v in bm.CONTINUOUS_VARIANTS]
    if not variants:
        raise ConfigError(
            f"continuous needs variants from {bm.CONTINUOUS_VARIANTS}")
    results = []
    for seed in cfg.seeds:
        spec = cfg.family_spec(seed)
        tc = cfg.train_config(seed)
        stage1 = bm.train_source_model(spec, bm.domain_ids(spec)[0], tc)
        for variant in variants:
            row, records = bm.run_continuous(
                spec, variant, tc, n_stream=cfg.n_stream,
                start_deg=cfg.drift_start_deg, end_deg=cfg.drift_end_deg,
                refine_capacity=cfg.buffer_capacity,
                refine_alpha=cfg.buffer_alpha, refine_lr=cfg.refine_lr,
                stage1_net=stage1)
            results.append(row)
            stream_csv = os.path.join(cfg.out, f"stream_{variant}_s{seed}.csv")
            _write_csv(stream_csv, ["idx", "pred", "label", "correct", "cum_acc"],
                       [[i, p, l, c, _fmt(a)] for i, p, l, c, a in records])
            if cfg.figures:
                report.render_stream_figure(stream_csv)
    results_csv = os.path.join(cfg.out, "results.csv")
    _write_csv(results_csv,
               ["source", "target", "variant", "seed", "accuracy", "wall_time_s"],
               _result_rows(results))
    if cfg.figures:
        report.render_pda_figure(results_csv)
    print(f"wrote {len(results)} result rows to {results_csv}")
    return 0


def cmd_sweep(cfg: ExperimentConfig) -> int:
    write_resolved(cfg, cfg.out)
    if cfg.target is None:
        raise ConfigError("sweep needs an explicit --target")
    spec = cfg.family_spec()
    tc = cfg.train_config(cfg.seeds[0])
    out = bm.sweep_auxiliary_count(
        spec, cfg.source, cfg.target, cfg.sweep_counts, cfg.sweep_repeats, tc,
        variant=cfg.variants[0], kernel=cfg.kernel())
    sweep_csv = os.path.join(cfg.out, "sweep.csv")
    _write_csv(sweep_csv, ["count", "mean_accuracy", "std_accuracy"],
               [[c, _fmt(m), _fmt(s)] for c, m, s, _ in out])
    all_rows = [r for _, _, _, rows in out for r in rows]
    _write_csv(os.path.join(cfg.out, "results.csv"),
               ["source", "target", "variant", "seed", "accuracy", "wall_time_s"],
               _result_rows(all_rows))
    if cfg.figures:
        report.render_sweep_figure(sweep_csv)
    print(f"wrote sweep over counts {cfg.sweep_counts} to {sweep_csv}")
    return 0


def _load_samples(path: str):
    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    return rows


def cmd_predict(args, cfg: ExperimentConfig) -> int:
    ck = load_checkpoint(args.checkpoint)
    net = ck["network"]
    if args.samples is not None:
        x = _load_samples(args.samples)
    else:
        # no sample file: draw a target-domain batch from the configured family
        spec = cfg.family_spec()
        rng = np.random.default_rng(cfg.seeds[0])
        x, _ = bm.BASE_GENERATORS[spec.base_dataset](
            cfg.samples_per_domain, spec.noise_std, rng)
        if args.metadata is not None:
            m = [float(v) for v in args.metadata.split(",")]
            x = bm.transform(x, np.asarray(m))
    if args.metadata is not None:
        if ck["graph"] is None:
            raise ConfigError("checkpoint has no graph; cannot use --metadata")
        m = [float(v) for v in args.metadata.split(",")]
        predict_from_metadata(ck["graph"], net, m, target_id="target")
        probs = predict_target(ck["graph"], net, x)
    elif ck["metadata_classifier"] is not None and ck["graph"] is not None:
        probs = np.stack([
            predict_from_image(ck["graph"], net, ck["metadata_classifier"],
                               ck["class_ids"], xi)
            for xi in x])
    else:
        raise ConfigError("need --metadata or a checkpoint with a "
                          "metadata classifier")
    out_csv = args.out_csv
    header = [f"p{c}" for c in range(probs.shape[1])] + ["pred"]
    _write_csv(out_csv, header,
               [[*(_fmt(v) for v in row), int(row.argmax())] for row in probs])
    print(f"wrote {probs.shape[0]} probability rows to {out_csv}")
    return 0


def cmd_stream(args, cfg: ExperimentConfig) -> int:
    ck = load_checkpoint(args.checkpoint)
    net = ck["network"]
    data = _load_samples(args.samples)
    input_dim = net.shared[0].weight.shape[1]
    xs = data[:, :input_dim]
    ys = data[:, input_dim].astype(int) if data.shape[1] > input_dim else None
    if not net.has_domain("target"):
        net.add_domain("target", init=net.domain_params(ck["source"]))
    engine = RefinementEngine(
        net, "target", capacity=cfg.buffer_capacity, alpha=cfg.buffer_alpha,
        refine_lr=cfg.refine_lr, update_stats=True,
        update_scale_bias=args.mode == "full")
    preds, cum = engine.run_stream(xs, ys)
    rows = []
    for i, p in enumerate(preds):
        if ys is None:
            rows.append([i, int(p), "", "", ""])
        else:
            rows.append([i, int(p), int(ys[i]), int(p == ys[i]), _fmt(cum[i])])
    _write_csv(args.out_csv, ["idx", "pred", "label", "correct", "cum_acc"], rows)
    if ys is not None:
        print(f"stream accuracy {cum[-1]:.4f} over {len(preds)} samples")
    return 0


def cmd_selftest() -> int:
    from .selftest import run_selftest
    return run_selftest()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="adagraph",
        description="Graph-based predictive and continuous domain adaptation "
                    "on synthetic multi-domain benchmarks.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", action="append", type=int, default=None,
                        help="seed (repeatable)")
        sp.add_argument("--variant", action="append", default=None,
                        help="variant (repeatable)")
        sp.add_argument("--source")
        sp.add_argument("--target")
        sp.add_argument("--no-figures", action="store_true")

    for name in ("pda", "continuous", "sweep"):
        add_common(sub.add_parser(name))

    for name in ("predict", "stream"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--checkpoint", required=True)
        sp.add_argument("--samples", help="CSV of feature rows")
        sp.add_argument("--out-csv", default="predictions.csv")
        if name == "predict":
            sp.add_argument("--metadata", help="comma-separated target metadata")
        else:
            sp.add_argument("--mode", choices=["stats", "full"], default="full")

    sub.add_parser("selftest")
    return p


def _parse_set_overrides(pairs: list[str]) -> dict:
    import json as _json
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        key, _, raw = pair.partition("=")
        try:
            out[key] = _json.loads(raw)
        except ValueError:
            out[key] = raw
    return out


def _resolve(args) -> ExperimentConfig:
    overrides = _parse_set_overrides(getattr(args, "set", []))
    if getattr(args, "out", None):
        overrides["out"] = args.out
    if getattr(args, "seed", None):
        overrides["seeds"] = args.seed
    if getattr(args, "variant", None):
        overrides["variants"] = args.variant
    if getattr(args, "source", None):
        overrides["source"] = args.source
    if getattr(args, "target", None):
        overrides["target"] = args.target
    if getattr(args, "no_figures", False):
        overrides["figures"] = False
    return parse_config(getattr(args, "config", None), overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest()
        cfg = _resolve(args)
        if args.command == "pda":
            return cmd_pda(cfg)
        if args.command == "continuous":
            return cmd_continuous(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "predict":
            return cmd_predict(args, cfg)
        if args.command == "stream":
            return cmd_stream(args, cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AdaGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
