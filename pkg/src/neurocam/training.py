"""Cross-validation splitting, the training loop (weighted BCE, early
stopping on validation loss, retention of the best-AUC epoch), and the
fold-level metric summaries."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataio import AD, HC
from .errors import DataError, NumericError
from .optim import Adam, AdamConfig, bce_with_logits
from .preprocess import matrix_from_upper_tri, smote_augment, upper_tri_vector
from .stats import fractional_ranks

log = logging.getLogger(__name__)


@dataclass
class FoldSplit:
    fold_id: int
    train_ids: list
    val_ids: list


def stratified_subject_kfold(cohort, k=10, seed=0):
    """Deal subjects (stratified by their majority class) into k folds;
    all of a subject's sessions stay together. Deterministic under seed."""
    by_class = {AD: [], HC: []}
    for subject in sorted(cohort.subject_index):
        by_class[cohort.subject_label(subject)].append(subject)
    for label, subjects in by_class.items():
        if len(subjects) < k:
            raise DataError(f"class {label} has {len(subjects)} subjects, need >= {k}")
    rng = np.random.default_rng(seed)
    fold_subjects = [[] for _ in range(k)]
    for label in (AD, HC):
        subjects = by_class[label]
        for i, idx in enumerate(rng.permutation(len(subjects))):
            fold_subjects[i % k].append(subjects[idx])
    splits = []
    for fold_id in range(k):
        val_set = set(fold_subjects[fold_id])
        val_ids = [s.session_id for s in cohort.sessions if s.subject_id in val_set]
        train_ids = [s.session_id for s in cohort.sessions if s.subject_id not in val_set]
        splits.append(FoldSplit(fold_id=fold_id, train_ids=train_ids, val_ids=val_ids))
    return splits


def class_weights(labels):
    """Balanced weights w_c = N/(2*N_c); labels are 1=AD, 0=HC.
    Returns (w_ad, w_hc)."""
    labels = np.asarray(labels)
    n_ad = int((labels == 1).sum())
    n_hc = len(labels) - n_ad
    if n_ad == 0 or n_hc == 0:
        raise DataError("both classes required for class weights")
    n = len(labels)
    return n / (2.0 * n_ad), n / (2.0 * n_hc)


def roc_auc(scores, labels):
    """Trapezoidal AUC == normalized Mann-Whitney U with ties counted half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = len(labels) - n1
    if n1 == 0 or n0 == 0:
        raise DataError("AUC undefined for single-class input")
    ranks = fractional_ranks(scores)
    return (ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0)


@dataclass
class TrainConfig:
    batch_size: int = 16
    patience: int = 8
    max_epochs: int = 200
    lr: float = 1e-3
    seed: int = 0
    smote: bool = False
    smote_k: int = 5
    clip_norm: float = 5.0  # global gradient-norm clip; 0 disables


def _clip_gradients(grads, max_norm):
    if max_norm <= 0:
        return
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


@dataclass
class TrainResult:
    history: list                # per-epoch dicts
    best_epoch: int
    stopped_epoch: int
    best_val_auc: float


def _mean_loss(model, xs, ys, weights):
    total = 0.0
    for x, y, w in zip(xs, ys, weights):
        logit, _ = model.forward(x)
        loss, _ = bce_with_logits(logit, y, w)
        total += loss
    return total / len(xs)


def predict_logits(model, xs):
    return np.array([model.forward(x)[0] for x in xs])


def train_model(model, x_train, y_train, x_val, y_val, config):
    """Train with weighted BCE + Adam. Stops early when validation loss
    has not improved for `patience` epochs; the parameters retained are
    those of the epoch with the highest validation AUC (falls back to
    the last epoch when AUC is undefined throughout)."""
    y_train = np.asarray(y_train)
    y_val = np.asarray(y_val)
    try:
        w_ad, w_hc = class_weights(y_train)
    except DataError:
        log.warning("single-class training data; class weights disabled")
        w_ad = w_hc = 1.0
    wt_train = np.where(y_train == 1, w_ad, w_hc)
    wt_val = np.where(y_val == 1, w_ad, w_hc)
    opt = Adam(AdamConfig(lr=config.lr))
    rng = np.random.default_rng(config.seed)
    n = len(x_train)
    best_loss = np.inf
    since_improve = 0
    best_auc = -np.inf
    best_auc_loss = np.inf
    best_params = None
    best_epoch = -1
    history = []
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            acc = None
            for i in batch:
                logit, _ = model.forward(x_train[i])
                loss, dz = bce_with_logits(logit, y_train[i], wt_train[i])
                epoch_loss += loss
                grads, _ = model.backward(dz)
                if acc is None:
                    acc = {k: v.copy() for k, v in grads.items()}
                else:
                    for k, v in grads.items():
                        acc[k] += v
            for k in acc:
                acc[k] /= len(batch)
            _clip_gradients(acc, config.clip_norm)
            opt.step(model.named_params(), acc)
        epoch_loss /= n
        if not np.isfinite(epoch_loss):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        val_logits = predict_logits(model, x_val)
        val_loss = np.mean([bce_with_logits(z, y, w)[0]
                            for z, y, w in zip(val_logits, y_val, wt_val)])
        try:
            val_auc = roc_auc(val_logits, y_val)
        except DataError:
            val_auc = float("nan")
        if np.ptp(val_logits) == 0:
            val_auc = float("nan")  # constant scores: AUC uninformative
        history.append({"epoch": epoch, "train_loss": float(epoch_loss),
                        "val_loss": float(val_loss), "val_auc": float(val_auc)})
        # retain the best-AUC epoch; ties broken by validation loss
        if np.isfinite(val_auc) and (val_auc, -val_loss) > (best_auc, -best_auc_loss):
            best_auc = val_auc
            best_auc_loss = val_loss
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.named_params().items()}
        if val_loss < best_loss:
            best_loss = val_loss
            since_improve = 0
        else:
            since_improve += 1
            if since_improve > config.patience:
                break
    if best_params is None:
        log.warning("validation AUC undefined in every epoch; keeping last epoch")
        best_epoch = epoch
        best_auc = float("nan")
    else:
        params = model.named_params()
        for k, v in best_params.items():
            params[k][...] = v
    return TrainResult(history=history, best_epoch=best_epoch,
                       stopped_epoch=epoch, best_val_auc=float(best_auc))


def confusion_counts(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    return {
        "tp": int(((y_true == 1) & (y_pred == 1)).sum()),
        "fn": int(((y_true == 1) & (y_pred == 0)).sum()),
        "fp": int(((y_true == 0) & (y_pred == 1)).sum()),
        "tn": int(((y_true == 0) & (y_pred == 0)).sum()),
    }


def rates_from_counts(counts):
    tp, fn, fp, tn = counts["tp"], counts["fn"], counts["fp"], counts["tn"]
    total = tp + fn + fp + tn
    return {
        "tpr": tp / (tp + fn) if tp + fn else float("nan"),
        "tnr": tn / (tn + fp) if tn + fp else float("nan"),
        "accuracy": (tp + tn) / total if total else float("nan"),
    }


@dataclass
class FoldMetrics:
    rows: list                    # per-fold rate dicts
    summary: dict = field(default_factory=dict)  # metric -> stats dict


def evaluate_fold_metrics(fold_counts, fold_aucs=None):
    """Per-fold TPR/TNR/accuracy plus median and IQR summaries
    (linear-interpolation quantiles)."""
    rows = []
    for i, counts in enumerate(fold_counts):
        row = {"fold": i, **counts, **rates_from_counts(counts)}
        if fold_aucs is not None:
            row["auc"] = fold_aucs[i]
        rows.append(row)
    summary = {}
    metrics = ["tpr", "tnr", "accuracy"] + (["auc"] if fold_aucs is not None else [])
    for metric in metrics:
        values = np.array([r[metric] for r in rows], dtype=np.float64)
        q1, med, q3 = np.quantile(values, [0.25, 0.5, 0.75])
        summary[metric] = {"median": float(med), "q1": float(q1),
                           "q3": float(q3), "iqr": float(q3 - q1)}
    return FoldMetrics(rows=rows, summary=summary)


def smote_balance(inputs, labels, k=5, seed=0):
    """Balance the minority class of graph inputs (1,N,N) by SMOTE on
    vectorized upper triangles. Returns (inputs, labels) with equal
    class counts; real samples come first, unchanged."""
    labels = np.asarray(labels)
    n_ad = int((labels == 1).sum())
    n_hc = len(labels) - n_ad
    if n_ad == n_hc:
        return list(inputs), labels
    minority = 1 if n_ad < n_hc else 0
    target = max(n_ad, n_hc)
    n_nodes = inputs[0].shape[-1]
    vectors = [upper_tri_vector(x[0]) for x, y in zip(inputs, labels) if y == minority]
    augmented = smote_augment(vectors, k=k, target_count=target, seed=seed)
    out_x = list(inputs)
    out_y = list(labels)
    for vec in augmented[len(vectors):]:
        out_x.append(matrix_from_upper_tri(vec, n_nodes)[None])
        out_y.append(minority)
    return out_x, np.asarray(out_y)


def run_fold(build_model, inputs, labels, split, config, fold_seed):
    """Train one fold; returns (counts, auc, model, train_result)."""
    x_train = [inputs[sid] for sid in split.train_ids]
    y_train = np.array([labels[sid] for sid in split.train_ids])
    x_val = [inputs[sid] for sid in split.val_ids]
    y_val = np.array([labels[sid] for sid in split.val_ids])
    if config.smote:
        x_train, y_train = smote_balance(x_train, y_train, k=config.smote_k,
                                         seed=fold_seed)
    model = build_model(fold_seed)
    result = train_model(model, x_train, y_train, x_val, y_val, config)
    val_logits = predict_logits(model, x_val)
    y_pred = (val_logits > 0).astype(int)
    counts = confusion_counts(y_val, y_pred)
    try:
        auc = roc_auc(val_logits, y_val)
    except DataError:
        auc = float("nan")
    return counts, auc, model, result


def crossval(cohort, build_model, inputs, config, k=10, jobs=1):
    """Full stratified k-fold run; folds may train on parallel threads
    (each fold owns its model instance). Returns
    (FoldMetrics, splits, histories)."""
    labels = {s.session_id: 1 if s.label == AD else 0 for s in cohort.sessions}
    splits = stratified_subject_kfold(cohort, k=k, seed=config.seed)

    def one(split):
        return run_fold(build_model, inputs, labels, split, config,
                        fold_seed=config.seed + split.fold_id)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, splits))
    else:
        results = [one(split) for split in splits]
    fold_counts = [r[0] for r in results]
    fold_aucs = [r[1] for r in results]
    histories = [r[3].history for r in results]
    for split, counts, auc in zip(splits, fold_counts, fold_aucs):
        log.info("fold %d: %s auc=%.3f", split.fold_id, counts, auc)
    return evaluate_fold_metrics(fold_counts, fold_aucs), splits, histories


def final_run(cohort, build_model, inputs, config, k=10):
    """Single 90/10 subject-exclusive stratified split; trains once and
    evaluates on the union of both partitions (train-contaminated by
    design, mirroring the upstream protocol). Returns
    (model, union_counts, predictions: session_id -> label)."""
    labels = {s.session_id: 1 if s.label == AD else 0 for s in cohort.sessions}
    split = stratified_subject_kfold(cohort, k=k, seed=config.seed)[0]
    holdout = FoldSplit(fold_id=0, train_ids=split.train_ids, val_ids=split.val_ids)
    _, _, model, _ = run_fold(build_model, inputs, labels, holdout, config,
                              fold_seed=config.seed)
    session_ids = [s.session_id for s in cohort.sessions]
    logits = predict_logits(model, [inputs[sid] for sid in session_ids])
    y_true = np.array([labels[sid] for sid in session_ids])
    y_pred = (logits > 0).astype(int)
    counts = confusion_counts(y_true, y_pred)
    predictions = {sid: (AD if p else HC) for sid, p in zip(session_ids, y_pred)}
    logit_map = {sid: float(z) for sid, z in zip(session_ids, logits)}
    return model, counts, predictions, logit_map
