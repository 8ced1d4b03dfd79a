"""Accuracy, per-class precision/recall, F1 and seed aggregation."""
import numpy as np


def confusion_matrix(y_true, y_pred, n_classes):
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def _safe_div(a, b):
    return np.divide(a, b, out=np.zeros_like(a, dtype=np.float64), where=b > 0)


def evaluate_predictions(y_true, y_pred, n_classes=None):
    """Metrics from the confusion matrix; F1 is positive-class F1 for two classes, macro otherwise."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if n_classes is None:
        n_classes = int(max(y_true.max(initial=0), y_pred.max(initial=0))) + 1
    cm = confusion_matrix(y_true, y_pred, n_classes)
    tp = np.diag(cm).astype(np.float64)
    precision = _safe_div(tp, cm.sum(axis=0).astype(np.float64))
    recall = _safe_div(tp, cm.sum(axis=1).astype(np.float64))
    f1_per = _safe_div(2 * precision * recall, precision + recall)
    if n_classes == 2:
        f1 = float(f1_per[1])
    else:
        present = cm.sum(axis=1) + cm.sum(axis=0) > 0
        f1 = float(f1_per[present].mean()) if present.any() else 0.0
    return {
        "accuracy": float(tp.sum() / max(cm.sum(), 1)),
        "f1": f1,
        "precision": precision.tolist(),
        "recall": recall.tolist(),
        "confusion": cm.tolist(),
        "n": int(cm.sum()),
    }


def evaluate(model, samples):
    y = np.array([g.label for g in samples])
    return evaluate_predictions(y, model.predict(samples), model.n_classes)


def aggregate(reports, keys=("accuracy", "f1")):
    if not reports:
        raise ValueError("nothing to aggregate")
    out = {"runs": len(reports)}
    for k in keys:
        vals = [r[k] for r in reports]
        out[k] = float(sum(vals) / len(vals))
        out[k + "_std"] = float(np.std(vals))
    return out
