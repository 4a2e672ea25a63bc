"""Command-line entry points.

Subcommands: synth, crossval, final-train, explain, stats, report.
Every run writes run.json (resolved config + sha256 of each artifact);
re-running a command with `--config run.json` into a fresh directory
reproduces the outputs byte-identically.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import __version__
from .atlasdef import default_names_path, default_targets_path
from .dataio import (AD, read_atlas, read_conn_csv, read_manifest,
                     read_names_tsv)
from .errors import DataError, NumericError
from .gradcam import explain_session
from .graph import load_checkpoint, read_checkpoint, save_checkpoint
from .nets import (BcGcnSeConfig, Cnn3dConfig, build_bcgcnse, build_resnet3d)
from .nifti import read_nifti
from .preprocess import (CROP_SHAPE, FINAL_SHAPE, crop_volume,
                         normalize_volume, resize_volume, scale_matrix)
from .report import (connectogram_payload, fmt_median_iqr, history_csv_text,
                     json_text, metrics_payload, stats_csv_text,
                     table2_markdown, write_heatmap_blob, write_pgm)
from .stats import (build_rv_sets, evaluate_parcels, rank_top_parcels,
                    StatReport, subgroup_analysis)
from .synth import (SignalSpec, gen_connectivity, gen_volumes,
                    write_connectivity_dataset, write_volume_dataset)
from .training import TrainConfig, crossval, final_run, rates_from_counts


class Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _int_list(text):
    return tuple(int(v) for v in str(text).split(",") if v != "")


def _float_list(text):
    return tuple(float(v) for v in str(text).split(",") if v != "")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_run_json(out_dir, command, args, artifact_names):
    config = {k: v for k, v in vars(args).items()
              if k not in ("command", "func", "config")}
    payload = {
        "version": __version__,
        "command": command,
        "config": config,
        "artifacts": {name: _sha256(Path(out_dir) / name)
                      for name in sorted(artifact_names)},
    }
    (Path(out_dir) / "run.json").write_text(json_text(payload))


def _load_config_file(path, command):
    """TOML config (tables per subcommand or flat) or a prior run.json."""
    path = Path(path)
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        if payload.get("command") != command:
            raise DataError(f"{path}: recorded command "
                            f"{payload.get('command')!r} != {command!r}")
        return payload["config"]
    with open(path, "rb") as f:
        data = tomllib.load(f)
    return data.get(command, data)


def _resolve(manifest_path, rel):
    p = Path(rel)
    return p if p.is_absolute() else Path(manifest_path).parent / p


# ---------------------------------------------------------------- loading

def load_graph_inputs(cohort, manifest_path, scale=True):
    inputs = {}
    n_nodes = None
    for rec in cohort.sessions:
        if not rec.matrix_path:
            raise DataError(f"{rec.session_id}: no matrix_path in manifest")
        path = _resolve(manifest_path, rec.matrix_path)
        if n_nodes is None:
            probe = np.loadtxt(path, delimiter=",", ndmin=2)
            n_nodes = probe.shape[0]
        mat = read_conn_csv(path, n_nodes=n_nodes).values
        if scale:
            mat = scale_matrix(mat)
        inputs[rec.session_id] = mat[None]
    return inputs, n_nodes


def _prepare_volume(vol, pipeline, center):
    if pipeline == "full" or (pipeline == "auto"
                              and all(a >= b for a, b in zip(vol.shape, CROP_SHAPE))):
        vol = resize_volume(crop_volume(vol), FINAL_SHAPE)
    return normalize_volume(vol, center=center)


def load_volume_inputs(cohort, manifest_path, pipeline="auto", center=True):
    inputs = {}
    shape = None
    for rec in cohort.sessions:
        if not rec.volume_path:
            raise DataError(f"{rec.session_id}: no volume_path in manifest")
        vol, _ = read_nifti(_resolve(manifest_path, rec.volume_path))
        vol = _prepare_volume(vol, pipeline, center)
        if shape is None:
            shape = vol.shape
        elif vol.shape != shape:
            raise DataError(f"{rec.session_id}: volume shape {vol.shape} "
                            f"differs from {shape}")
        inputs[rec.session_id] = vol[None]
    return inputs, shape


def _model_setup(args, cohort):
    """Returns (inputs, builder, meta) for the chosen model kind."""
    if args.model == "bcgcnse":
        inputs, n_nodes = load_graph_inputs(cohort, args.manifest,
                                            scale=not args.no_scale)
        cfg = BcGcnSeConfig(n_nodes=n_nodes, channels=args.channels,
                            se_reduction=args.se_reduction,
                            fc_widths=args.fc_widths)
        builder = lambda seed: build_bcgcnse(cfg, seed=seed)
        meta = {"model": "bcgcnse", "config": asdict(cfg),
                "preprocess": {"scale": not args.no_scale}}
    else:
        inputs, shape = load_volume_inputs(cohort, args.manifest,
                                           pipeline=args.volume_pipeline,
                                           center=not args.no_center)
        cfg = Cnn3dConfig(input_shape=shape, stem_channels=args.stem_channels,
                          stage_channels=args.stage_channels,
                          fc_widths=args.cnn_fc_widths)
        builder = lambda seed: build_resnet3d(cfg, seed=seed)
        meta = {"model": "cnn3d", "config": asdict(cfg),
                "preprocess": {"pipeline": args.volume_pipeline,
                               "center": not args.no_center}}
    return inputs, builder, meta


def _train_config(args):
    batch = args.batch if args.batch else (64 if args.model == "bcgcnse" else 16)
    smote = args.model == "bcgcnse" if args.smote is None else args.smote
    return TrainConfig(batch_size=batch, patience=args.patience,
                       max_epochs=args.epochs, lr=args.lr, seed=args.seed,
                       smote=smote, smote_k=args.smote_k)


def _model_from_checkpoint(path):
    meta, _ = read_checkpoint(path)
    cfg_dict = dict(meta["config"])
    if meta["model"] == "bcgcnse":
        cfg_dict["channels"] = tuple(cfg_dict["channels"])
        cfg_dict["fc_widths"] = tuple(cfg_dict["fc_widths"])
        model = build_bcgcnse(BcGcnSeConfig(**cfg_dict), seed=0)
    else:
        cfg_dict["input_shape"] = tuple(cfg_dict["input_shape"])
        cfg_dict["stage_channels"] = tuple(cfg_dict["stage_channels"])
        cfg_dict["fc_widths"] = tuple(cfg_dict["fc_widths"])
        model = build_resnet3d(Cnn3dConfig(**cfg_dict), seed=0)
    load_checkpoint(model, path)
    return model, meta


# ------------------------------------------------------------- subcommands

def cmd_synth(args):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    hc, ad = args.hc_subjects, args.ad_subjects
    if args.paper_ratio:
        hc, ad = 557, 135
    spec = SignalSpec(n_parcels=args.n_parcels, planted=args.planted,
                      effect=args.delta, noise_sigma=args.sigma,
                      sign=args.sign, n_hc_subjects=hc, n_ad_subjects=ad,
                      session_probs=args.session_probs,
                      mixed_fraction=args.mixed_fraction)
    if args.kind == "connectivity":
        cohort, matrices = gen_connectivity(spec, seed=args.seed)
        cohort = write_connectivity_dataset(out_dir, cohort, matrices)
    else:
        cohort, volumes, labels = gen_volumes(spec, seed=args.seed,
                                              shape=args.shape)
        cohort = write_volume_dataset(out_dir, cohort, volumes, labels,
                                      spec.n_parcels)
    counts = cohort.class_counts()
    artifacts = [str(p.relative_to(out_dir))
                 for p in sorted(out_dir.rglob("*")) if p.is_file()
                 and p.name != "run.json"]
    _write_run_json(out_dir, "synth", args, artifacts)
    print(f"wrote {len(cohort.sessions)} sessions "
          f"(HC:AD = {counts['HC']}:{counts['AD']}) to {out_dir}")
    return 0


def cmd_crossval(args):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cohort = read_manifest(args.manifest)
    inputs, builder, meta = _model_setup(args, cohort)
    config = _train_config(args)
    metrics, _, histories = crossval(cohort, builder, inputs, config,
                                     k=args.folds, jobs=args.jobs)
    payload = metrics_payload(metrics, meta["model"])
    (out_dir / "metrics.json").write_text(json_text(payload))
    (out_dir / "history.csv").write_text(history_csv_text(histories))
    _write_run_json(out_dir, "crossval", args, ["metrics.json", "history.csv"])
    summary = payload["summary"]
    for metric in ("tpr", "tnr", "accuracy"):
        s = summary[metric]
        print(f"{metric}: {fmt_median_iqr(s['median'], s['q1'], s['q3'])}")
    return 0


def cmd_final_train(args):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cohort = read_manifest(args.manifest)
    inputs, builder, meta = _model_setup(args, cohort)
    config = _train_config(args)
    model, counts, predictions, logits = final_run(cohort, builder, inputs,
                                                   config, k=args.folds)
    save_checkpoint(model, out_dir / "checkpoint.bin", meta=meta)
    rates = rates_from_counts(counts)
    payload = {"model": meta["model"], "counts": counts,
               "union": {k: round(v, 10) for k, v in rates.items()},
               "note": "union metrics include training data by design"}
    (out_dir / "union_metrics.json").write_text(json_text(payload))
    lines = ["session_id,true,predicted,logit"]
    for rec in cohort.sessions:
        sid = rec.session_id
        lines.append(f"{sid},{rec.label},{predictions[sid]},{logits[sid]:.10g}")
    (out_dir / "predictions.csv").write_text("\n".join(lines) + "\n")
    _write_run_json(out_dir, "final-train", args,
                    ["checkpoint.bin", "union_metrics.json", "predictions.csv"])
    print(f"union: TPR={rates['tpr']:.3f} TNR={rates['tnr']:.3f} "
          f"accuracy={rates['accuracy']:.3f}")
    return 0


def _atlas_for_explain(args, meta):
    if meta["model"] == "bcgcnse":
        names_path = args.atlas_names or default_names_path()
        names, _ = read_names_tsv(names_path)
        n_nodes = meta["config"]["n_nodes"]
        if len(names) != n_nodes:
            names = [f"P{i:03d}" for i in range(1, n_nodes + 1)]
        return None, names
    if not args.atlas_labels or not args.atlas_names:
        raise DataError("cnn3d explain needs --atlas-labels and --atlas-names")
    atlas = read_atlas(args.atlas_labels, args.atlas_names)
    return atlas, atlas.names


def cmd_explain(args):
    out_dir = Path(args.out)
    (out_dir / "heatmaps").mkdir(parents=True, exist_ok=True)
    model, meta = _model_from_checkpoint(args.checkpoint)
    cohort = read_manifest(args.manifest)
    if meta["model"] == "bcgcnse":
        inputs, _ = load_graph_inputs(cohort, args.manifest,
                                      scale=meta["preprocess"]["scale"])
    else:
        inputs, _ = load_volume_inputs(cohort, args.manifest,
                                       pipeline=meta["preprocess"]["pipeline"],
                                       center=meta["preprocess"]["center"])
    atlas, names = _atlas_for_explain(args, meta)
    if args.slices:
        (out_dir / "slices").mkdir(exist_ok=True)

    def run_chunk(replica, records):
        out = []
        for rec in records:
            heatmap, rvs = explain_session(replica, inputs[rec.session_id],
                                           rec.label, atlas)
            logit, _ = replica.forward(inputs[rec.session_id])
            out.append((rec, heatmap, rvs, logit))
        return out

    if args.jobs > 1:
        # one model replica per worker; sessions are read-only on weights
        chunks = [cohort.sessions[i::args.jobs] for i in range(args.jobs)]
        replicas = [model] + [_model_from_checkpoint(args.checkpoint)[0]
                              for _ in range(len(chunks) - 1)]
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            chunked = list(pool.map(run_chunk, replicas, chunks))
        by_sid = {r[0].session_id: r for chunk in chunked for r in chunk}
        results = [by_sid[rec.session_id] for rec in cohort.sessions]
    else:
        results = run_chunk(model, cohort.sessions)

    rv_lines = ["session_id,class,parcel,acronym,rv"]
    pred_lines = ["session_id,true,predicted,logit"]
    artifacts = ["rv.csv", "predictions.csv"]
    for rec, heatmap, rvs, logit in results:
        sid = rec.session_id
        blob = f"heatmaps/{sid}.bin"
        write_heatmap_blob(out_dir / blob, heatmap)
        artifacts.append(blob)
        for parcel, rv in enumerate(rvs, start=1):
            rv_lines.append(f"{sid},{rec.label},{parcel},"
                            f"{names[parcel - 1]},{rv:.10g}")
        pred = AD if logit > 0 else "HC"
        pred_lines.append(f"{sid},{rec.label},{pred},{logit:.10g}")
        if args.slices:
            img = heatmap if heatmap.ndim == 2 else heatmap[:, :, heatmap.shape[2] // 2]
            slice_name = f"slices/{sid}.pgm"
            write_pgm(out_dir / slice_name, img)
            artifacts.append(slice_name)
    (out_dir / "rv.csv").write_text("\n".join(rv_lines) + "\n")
    (out_dir / "predictions.csv").write_text("\n".join(pred_lines) + "\n")
    _write_run_json(out_dir, "explain", args, artifacts)
    print(f"explained {len(results)} sessions "
          f"({len(names)} parcels) into {out_dir}")
    return 0


def _read_rv_csv(path):
    table = {}
    classes = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            sid = row["session_id"]
            table.setdefault(sid, {})[int(row["parcel"])] = float(row["rv"])
            classes[sid] = row["class"]
    out = {}
    for sid, rows in table.items():
        vec = np.array([rows[p] for p in sorted(rows)])
        out[sid] = vec
    return out, classes


def _read_predictions_csv(path):
    with open(path, newline="") as f:
        return {row["session_id"]: row["predicted"]
                for row in csv.DictReader(f)}


def _run_stats_pipeline(rv_path, pred_path, cohort, alpha):
    rv_table, _ = _read_rv_csv(rv_path)
    predictions = _read_predictions_csv(pred_path)
    rv_sets = build_rv_sets(rv_table, predictions, cohort)
    tests = evaluate_parcels(rv_sets, alpha=alpha)
    top_ad, top_hc = rank_top_parcels(rv_sets)
    report = StatReport(tests=tests, top_ad=top_ad, top_hc=top_hc, alpha=alpha)
    mean_ad = {p: float(np.mean(rv_sets.ad[p])) for p in rv_sets.parcels()}
    mean_hc = {p: float(np.mean(rv_sets.hc[p])) for p in rv_sets.parcels()}
    return report, mean_ad, mean_hc


def cmd_stats(args):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cohort = read_manifest(args.manifest)
    names, lobes = read_names_tsv(args.atlas_names or default_names_path())
    report, mean_ad, mean_hc = _run_stats_pipeline(args.rv, args.predictions,
                                                   cohort, args.alpha)
    n_parcels = len(report.tests)
    if len(names) != n_parcels:
        names = [f"P{i:03d}" for i in range(1, n_parcels + 1)]
        lobes = {n: "" for n in names}
    with open(args.targets or default_targets_path(), "rb") as f:
        targets = tomllib.load(f)
    targets = {k: [a for a in v if a in set(names)] for k, v in targets.items()}

    model_tables = {args.model_name: [
        {"acronym": names[t.parcel - 1], "p_adj": t.p_adj}
        for t in report.tests if t.significant]}
    common = None
    if args.rv2:
        if not args.predictions2:
            raise DataError("--rv2 needs --predictions2")
        report2, _, _ = _run_stats_pipeline(args.rv2, args.predictions2,
                                            cohort, args.alpha)
        model_tables[args.model2_name] = [
            {"acronym": names[t.parcel - 1], "p_adj": t.p_adj}
            for t in report2.tests if t.significant]
        sets = [set(r["acronym"] for r in rows) for rows in model_tables.values()]
        common = sets[0] & sets[1]

    (out_dir / "stats.csv").write_text(
        stats_csv_text(report.tests, names, mean_ad, mean_hc))
    subgroups = subgroup_analysis(report, names, targets)
    (out_dir / "subgroups.json").write_text(json_text(subgroups))
    (out_dir / "table2.md").write_text(table2_markdown(model_tables, common))
    payload = connectogram_payload(report.tests, names, lobes, mean_ad,
                                   mean_hc, report.top_ad, report.top_hc)
    (out_dir / "connectogram.json").write_text(json_text(payload))
    _write_run_json(out_dir, "stats", args,
                    ["stats.csv", "subgroups.json", "table2.md",
                     "connectogram.json"])
    n_sig = len(report.significant_parcels())
    print(f"{n_sig}/{n_parcels} parcels significant at alpha={args.alpha} "
          f"(BY-adjusted)")
    return 0


def cmd_report(args):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats_dir = Path(args.stats_dir)
    lines = ["# Run report", ""]
    metrics_path = Path(args.metrics) if args.metrics else None
    if metrics_path and metrics_path.exists():
        payload = json.loads(metrics_path.read_text())
        lines += [f"## Cross-validation ({payload.get('model', '?')})", "",
                  "| | Predicted P | Predicted N |", "| --- | --- | --- |"]
        cm = payload["confusion_matrix"]
        lines.append(f"| Actual P | {cm['actual_positive']['predicted_positive']} "
                     f"| {cm['actual_positive']['predicted_negative']} |")
        lines.append(f"| Actual N | {cm['actual_negative']['predicted_positive']} "
                     f"| {cm['actual_negative']['predicted_negative']} |")
        lines.append("")
    table2 = stats_dir / "table2.md"
    if table2.exists():
        lines += [table2.read_text(), ""]
    subgroups_path = stats_dir / "subgroups.json"
    if subgroups_path.exists():
        subgroups = json.loads(subgroups_path.read_text())
        lines += ["## Target-set hits", ""]
        for name, info in subgroups.get("targets", {}).items():
            lines.append(
                f"- {name}: {info['hit_count']}/{info['size']} parcels "
                f"significant ({info['hit_region_count']}/{info['region_count']} "
                f"regions ignoring lateralization)")
        lines.append("")
    (out_dir / "report.md").write_text("\n".join(lines))
    artifacts = ["report.md"]
    connectogram = stats_dir / "connectogram.json"
    if connectogram.exists():
        (out_dir / "connectogram.json").write_text(connectogram.read_text())
        artifacts.append("connectogram.json")
    _write_run_json(out_dir, "report", args, artifacts)
    print(f"wrote report.md to {out_dir}")
    return 0


# ---------------------------------------------------------------- parser

def _add_train_flags(p):
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", choices=["bcgcnse", "cnn3d"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=0,
                   help="0 = model default (64 graph, 16 cnn)")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=8)
    p.add_argument("--smote", action=argparse.BooleanOptionalAction,
                   default=None, help="default: on for bcgcnse only")
    p.add_argument("--smote-k", type=int, default=5)
    p.add_argument("--no-scale", action="store_true",
                   help="skip connectivity max-scaling")
    p.add_argument("--no-center", action="store_true",
                   help="variance scaling without mean centering")
    p.add_argument("--volume-pipeline", choices=["auto", "full", "none"],
                   default="auto")
    p.add_argument("--channels", type=_int_list, default=(8, 16, 32))
    p.add_argument("--se-reduction", type=int, default=4)
    p.add_argument("--fc-widths", type=_int_list, default=(32, 8))
    p.add_argument("--stem-channels", type=int, default=8)
    p.add_argument("--stage-channels", type=_int_list, default=(8, 16, 32, 64))
    p.add_argument("--cnn-fc-widths", type=_int_list, default=(128, 32))
    p.add_argument("--jobs", type=int, default=1)


def build_parser():
    """Returns (parser, {command: subparser})."""
    parser = Parser(prog="neurocam", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=Parser)
    commands = {}

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config")
    p.add_argument("--kind", choices=["connectivity", "volumes"],
                   required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-parcels", type=int, default=132)
    p.add_argument("--planted", type=_int_list, default=(10, 40, 80, 120))
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--sign", type=int, choices=[1, -1], default=1)
    p.add_argument("--hc-subjects", type=int, default=50)
    p.add_argument("--ad-subjects", type=int, default=50)
    p.add_argument("--paper-ratio", action="store_true",
                   help="557 HC / 135 AD subjects")
    p.add_argument("--mixed-fraction", type=float, default=0.0276)
    p.add_argument("--session-probs", type=_float_list, default=(1.0,))
    p.add_argument("--shape", type=_int_list, default=(32, 32, 32))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    commands["synth"] = p

    p = sub.add_parser("crossval", help="stratified k-fold cross-validation")
    p.add_argument("--config")
    _add_train_flags(p)
    p.set_defaults(func=cmd_crossval)
    commands["crossval"] = p

    p = sub.add_parser("final-train", help="90/10 split, union evaluation, "
                       "checkpoint for the XAI stage")
    p.add_argument("--config")
    _add_train_flags(p)
    p.set_defaults(func=cmd_final_train)
    commands["final-train"] = p

    p = sub.add_parser("explain", help="Grad-CAM heatmaps + parcel RVs")
    p.add_argument("--config")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--atlas-labels")
    p.add_argument("--atlas-names")
    p.add_argument("--slices", action="store_true",
                   help="write PGM heatmap slices")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_explain)
    commands["explain"] = p

    p = sub.add_parser("stats", help="relevance statistics + rankings")
    p.add_argument("--config")
    p.add_argument("--manifest", required=True)
    p.add_argument("--rv", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--rv2", help="second model rv.csv for the common marker")
    p.add_argument("--predictions2")
    p.add_argument("--model-name", default="model")
    p.add_argument("--model2-name", default="model2")
    p.add_argument("--atlas-names")
    p.add_argument("--targets")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)
    commands["stats"] = p

    p = sub.add_parser("report", help="combine outputs into report.md")
    p.add_argument("--config")
    p.add_argument("--stats-dir", required=True)
    p.add_argument("--metrics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    commands["report"] = p
    return parser, commands


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, _ = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            try:
                overrides = _load_config_file(args.config, args.command)
            except (OSError, ValueError, DataError) as exc:
                sys.stderr.write(f"neurocam: config error: {exc}\n")
                return 2
            # config file values become defaults; explicit flags still win
            parser, commands = build_parser()
            commands[args.command].set_defaults(
                **{k: v for k, v in overrides.items() if k != "func"})
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        sys.stderr.write(f"neurocam: data error: {exc}\n")
        return 2
    except NumericError as exc:
        sys.stderr.write(f"neurocam: numeric failure: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
