"""Bias-aware train/test splits and label-budget sampling."""
from dataclasses import dataclass, field

import numpy as np

SPLIT_MODES = ("leave_one_family_out", "temporal", "cluster_leave_out", "fixed")


@dataclass
class SplitSpec:
    mode: str = "fixed"
    holdout: object = None
    source_train: float = 0.75
    target_train: float = 0.5
    budget: int = 20
    seed: int = 0
    benign_label: int = 0

    def __post_init__(self):
        if self.mode not in SPLIT_MODES:
            raise ValueError(f"unknown split mode {self.mode!r}")


@dataclass
class Split:
    source_train: list
    source_test: list
    target_train: list
    target_test: list
    target_labeled: list = field(default_factory=list)
    target_unlabeled: list = field(default_factory=list)


def stratified_split(records, frac, rng):
    """Per-class shuffle and cut, so class counts in each part stay proportional."""
    labels = sorted({r.label for r in records})
    train, test = [], []
    for c in labels:
        members = [r for r in records if r.label == c]
        order = rng.permutation(len(members))
        k = int(round(frac * len(members)))
        train.extend(members[i] for i in order[:k])
        test.extend(members[i] for i in order[k:])
    return train, test


def temporal_split(records, frac):
    """Earliest records train, latest test; ties never straddle the boundary."""
    if any(r.timestamp is None for r in records):
        raise ValueError("temporal split needs a timestamp on every record")
    ordered = sorted(records, key=lambda r: (r.timestamp, r.sample_id))
    k = int(round(frac * len(ordered)))
    while 0 < k < len(ordered) and ordered[k].timestamp == ordered[k - 1].timestamp:
        k -= 1
    return ordered[:k], ordered[k:]


def check_temporal(train, test):
    """Reject any training record dated on or after the earliest test record."""
    if not train or not test:
        return
    latest = max(r.timestamp for r in train)
    earliest = min(r.timestamp for r in test)
    if latest >= earliest:
        bad = [r.sample_id for r in train if r.timestamp >= earliest]
        raise ValueError(f"temporal bias: training records {bad[:5]} are not before {earliest}")


def sample_budget(target_train, budget, rng):
    if budget > len(target_train):
        raise ValueError(f"budget {budget} exceeds target training size {len(target_train)}")
    idx = rng.choice(len(target_train), size=budget, replace=False)
    chosen = set(idx.tolist())
    labeled = [target_train[i] for i in sorted(chosen)]
    unlabeled = [r for i, r in enumerate(target_train) if i not in chosen]
    return labeled, unlabeled


def _domains_by_tag(records):
    src = [r for r in records if r.domain == "source"]
    tgt = [r for r in records if r.domain == "target"]
    if len(src) + len(tgt) != len(records):
        raise ValueError("fixed split needs domain 'source' or 'target' on every record")
    return src, tgt


def _leave_out(records, key, holdout, spec, rng):
    values = {getattr(r, key) for r in records}
    if holdout not in values:
        raise ValueError(f"leave-out {key} {holdout!r} not present in the manifest")
    benign = [r for r in records if r.label == spec.benign_label]
    held = [r for r in records if getattr(r, key) == holdout and r.label != spec.benign_label]
    rest = [r for r in records if getattr(r, key) != holdout and r.label != spec.benign_label]
    if any(r.domain for r in benign):
        src_b = [r for r in benign if r.domain != "target"]
        tgt_b = [r for r in benign if r.domain == "target"]
    else:
        # benign samples are shared out in proportion to the malware counts
        order = rng.permutation(len(benign))
        k = int(round(len(benign) * len(rest) / max(len(rest) + len(held), 1)))
        src_b = [benign[i] for i in order[:k]]
        tgt_b = [benign[i] for i in order[k:]]
    return rest + src_b, held + tgt_b


def split(records, spec):
    """Source train/test, target train/test and the labeled budget subset."""
    rng = np.random.default_rng(spec.seed)
    if spec.mode == "fixed":
        src, tgt = _domains_by_tag(records)
    elif spec.mode == "leave_one_family_out":
        src, tgt = _leave_out(records, "family", spec.holdout, spec, rng)
    elif spec.mode == "cluster_leave_out":
        src, tgt = _leave_out(records, "cluster", spec.holdout, spec, rng)
    else:
        src, tgt = _temporal_domains(records, spec)

    if spec.mode == "temporal":
        s_tr, s_te = temporal_split(src, spec.source_train)
        t_tr, t_te = temporal_split(tgt, spec.target_train)
        check_temporal(s_tr, s_te)
        check_temporal(s_tr + t_tr, t_te)
    else:
        s_tr, s_te = stratified_split(src, spec.source_train, rng)
        t_tr, t_te = stratified_split(tgt, spec.target_train, rng)
    labeled, unlabeled = sample_budget(t_tr, spec.budget, rng)
    return Split(s_tr, s_te, t_tr, t_te, labeled, unlabeled)


def _temporal_domains(records, spec):
    if any(r.timestamp is None for r in records):
        raise ValueError("temporal split needs a timestamp on every record")
    if spec.holdout is not None:
        cutoff = str(spec.holdout)
        src = [r for r in records if r.timestamp < cutoff]
        tgt = [r for r in records if r.timestamp >= cutoff]
    else:
        src, tgt = _domains_by_tag(records)
        check_temporal(src, tgt)
    return src, tgt
