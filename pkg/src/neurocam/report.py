"""Human-readable artifact rendering: summary strings, the metrics
payload with the normalized-confusion-matrix rendering, significant-
parcel tables, PGM images, heatmap blobs, and connectogram JSON."""

import json
import struct

import numpy as np


def fmt_median_iqr(median, q1, q3):
    return f"{median:.3f} [{q1:.3f}, {q3:.3f}]"


def fmt_p(p):
    return "< 0.001" if p < 0.001 else f"{p:.3f}"


def json_text(payload):
    """Deterministic JSON rendering (stable key order, no whitespace drift)."""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _cell(rows, key, flip=False):
    values = np.array([1.0 - r[key] if flip else r[key] for r in rows])
    q1, med, q3 = np.quantile(values, [0.25, 0.5, 0.75])
    return fmt_median_iqr(med, q1, q3)


def metrics_payload(fold_metrics, model_name):
    """metrics.json content: per-fold rows, summaries, and the normalized
    confusion matrix rendered as 'median [Q1, Q3]' strings."""
    rows = fold_metrics.rows
    return {
        "model": model_name,
        "folds": rows,
        "summary": fold_metrics.summary,
        "confusion_matrix": {
            "actual_positive": {
                "predicted_positive": _cell(rows, "tpr"),
                "predicted_negative": _cell(rows, "tpr", flip=True),
            },
            "actual_negative": {
                "predicted_positive": _cell(rows, "tnr", flip=True),
                "predicted_negative": _cell(rows, "tnr"),
            },
        },
    }


def history_csv_text(histories):
    """history.csv: fold, epoch, train_loss, val_loss, val_auc."""
    lines = ["fold,epoch,train_loss,val_loss,val_auc"]
    for fold, history in enumerate(histories):
        for row in history:
            lines.append(f"{fold},{row['epoch']},{row['train_loss']:.10g},"
                         f"{row['val_loss']:.10g},{row['val_auc']:.10g}")
    return "\n".join(lines) + "\n"


def stats_csv_text(tests, names, mean_rv_ad, mean_rv_hc):
    lines = ["parcel,acronym,test,statistic,p_raw,p_adj,significant,"
             "direction,mean_rv_ad,mean_rv_hc"]
    for t in tests:
        lines.append(
            f"{t.parcel},{names[t.parcel - 1]},{t.test},{t.statistic:.10g},"
            f"{t.p_raw:.10g},{t.p_adj:.10g},{int(t.significant)},"
            f"{t.direction},{mean_rv_ad[t.parcel]:.10g},"
            f"{mean_rv_hc[t.parcel]:.10g}")
    return "\n".join(lines) + "\n"


def table2_markdown(model_tables, common=None):
    """Significant-parcel listing per model; `common` acronyms (present in
    every model's significant set) are marked with an asterisk."""
    common = common or set()
    out = ["# Parcels with significant AD/HC relevance difference", ""]
    if common:
        out += ["Parcels marked with `*` are significant for every model.", ""]
    for model_name, rows in model_tables.items():
        out += [f"## {model_name}", "", "| N. | Parcel | Adjusted p |",
                "| --- | --- | --- |"]
        ordered = sorted(rows, key=lambda r: r["acronym"].lower())
        for i, row in enumerate(ordered, start=1):
            star = "*" if row["acronym"] in common else ""
            out.append(f"| {i} | {row['acronym']}{star} | {fmt_p(row['p_adj'])} |")
        out.append("")
    return "\n".join(out)


def write_pgm(path, array2d):
    """8-bit grayscale PGM, max-scaled; header 'P5 W H 255'."""
    arr = np.asarray(array2d, dtype=np.float64)
    top = arr.max()
    pixels = np.zeros(arr.shape, dtype=np.uint8) if top <= 0 else \
        np.clip(arr / top * 255.0, 0, 255).round().astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5 {w} {h} 255\n".encode())
        f.write(pixels.tobytes())


def write_heatmap_blob(path, heatmap):
    """Shape-prefixed float64 blob: uint32 rank, uint32 dims, C-order data
    (all little-endian)."""
    arr = np.ascontiguousarray(heatmap, dtype="<f8")
    with open(path, "wb") as f:
        f.write(struct.pack("<I", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.tobytes())


def read_heatmap_blob(path):
    with open(path, "rb") as f:
        raw = f.read()
    (rank,) = struct.unpack_from("<I", raw, 0)
    shape = struct.unpack_from(f"<{rank}I", raw, 4)
    return np.frombuffer(raw, dtype="<f8", offset=4 + 4 * rank).reshape(shape).copy()


def connectogram_payload(tests, names, lobes, mean_rv_ad, mean_rv_hc,
                         top_ad, top_hc):
    """Node list for external connectogram tooling."""
    nodes = []
    for t in tests:
        acro = names[t.parcel - 1]
        nodes.append({
            "parcel": t.parcel,
            "acronym": acro,
            "lobe": lobes.get(acro, ""),
            "mean_rv_ad": round(mean_rv_ad[t.parcel], 10),
            "mean_rv_hc": round(mean_rv_hc[t.parcel], 10),
            "top_ad": t.parcel in set(top_ad),
            "top_hc": t.parcel in set(top_hc),
            "significant": t.significant,
            "p_adj": round(t.p_adj, 10),
            "direction": t.direction,
        })
    return {"nodes": nodes}
