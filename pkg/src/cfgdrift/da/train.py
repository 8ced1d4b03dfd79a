"""Training loops: adversarial / MMD alignment, supervised, cold and warm start."""
import hashlib
from dataclasses import dataclass, field, asdict

import numpy as np

from ..nn.layers import constant_parameters, set_stat_updates
from ..nn.optim import Adam
from ..nn.tensor import Tensor, take_rows
from .losses import (
    domain_probability,
    loss_classification,
    loss_discriminator,
    loss_generator,
    mmd_rbf,
)
from .model import build_model

MODES = ("adversarial", "mmd", "none")


@dataclass
class TrainConfig:
    gamma: float = 0.1
    lam: float = 0.1
    mmd_weight: float = 1.0
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 16
    seed: int = 0
    alignment_mode: str = "adversarial"
    generator: str = "gin"
    hidden: int = 64
    n_layers: int = 3
    latent: int = 256
    n_classes: int = 2
    zero_init_output: bool = False

    def __post_init__(self):
        if self.gamma < 0 or self.lam < 0 or self.mmd_weight < 0:
            raise ValueError("gamma and lam must be non-negative")
        if self.alignment_mode not in MODES:
            raise ValueError(f"unknown alignment mode {self.alignment_mode!r}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    model: object
    history: list = field(default_factory=list)
    phase1: object = None


def _streams(seed):
    return np.random.SeedSequence(seed).spawn(3)


def _new_model(samples, cfg, streams):
    first = samples[0]
    n_in = first.X.shape[1] if cfg.generator == "gin" else np.asarray(getattr(first, "values", first)).shape[0]
    return build_model(n_in, cfg.n_classes, streams, generator=cfg.generator, hidden=cfg.hidden,
                       n_layers=cfg.n_layers, latent=cfg.latent, zero_init_output=cfg.zero_init_output)


def _label(sample):
    y = getattr(sample, "Y", None)
    if y is not None:
        return int(np.argmax(y))
    return int(sample.label)


def params_digest(module):
    """Hash of all parameter and buffer bytes in a stable order."""
    h = hashlib.sha256()
    for name, arr in sorted(module.state().items()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def _supervised_epochs(model, opt, samples, labels, cfg, rng, epochs, history, phase=0):
    n = len(samples)
    bs = cfg.batch_size
    for epoch in range(epochs):
        order = rng.permutation(n)
        for b, start in enumerate(range(0, n, bs)):
            idx = order[start:start + bs]
            if len(idx) < 2:
                # batch norm needs two rows; a trailing singleton batch is skipped
                continue
            inputs = model.make_inputs([samples[i] for i in idx])
            logits = model.classifier(model.generator(inputs))
            loss = loss_classification(logits, labels[idx], np.zeros(len(idx)), 0.0, reduction="mean")
            opt.zero_grad()
            loss.backward()
            opt.step()
            history.append({"phase": phase, "epoch": epoch, "batch": b, "L_c": float(loss.data)})


def train_supervised(samples, cfg):
    """Plain supervised training of generator + classifier on labeled samples."""
    if not samples:
        raise ValueError("no training samples")
    streams = _streams(cfg.seed)
    model = _new_model(samples, cfg, streams)
    model.train()
    labels = np.array([_label(s) for s in samples])
    opt = Adam(model.generator.trainable_parameters() + model.classifier.trainable_parameters(),
               lr=cfg.learning_rate)
    rng = np.random.default_rng(streams[2])
    history = []
    _supervised_epochs(model, opt, samples, labels, cfg, rng, cfg.epochs, history)
    model.eval()
    return TrainResult(model, history)


def train_adversarial(source, target_labeled, target_unlabeled, cfg):
    """Alternating generator/classifier and discriminator updates.

    Each mini-batch holds ceil(B/2) source graphs (one pass over the source
    per epoch) and floor(B/2) target graphs drawn with replacement from the
    target pool.  Without target data every batch is all-source.
    """
    if not source:
        raise ValueError("source set is empty")
    target_labeled = list(target_labeled or [])
    target_unlabeled = list(target_unlabeled or [])
    mode = cfg.alignment_mode
    if mode == "none":
        target_unlabeled = []
        if cfg.lam == 0:
            target_labeled = []
    pool = target_labeled + target_unlabeled
    pool_labeled = np.array([True] * len(target_labeled) + [False] * len(target_unlabeled))
    pool_labels = np.array([_label(s) for s in target_labeled] + [0] * len(target_unlabeled), dtype=np.int64)
    src_labels = np.array([_label(s) for s in source], dtype=np.int64)

    streams = _streams(cfg.seed)
    model = _new_model(source, cfg, streams)
    model.train()
    gc_params = model.generator.trainable_parameters() + model.classifier.trainable_parameters()
    opt_gc = Adam(gc_params, lr=cfg.learning_rate)
    opt_d = Adam(model.discriminator.trainable_parameters(), lr=cfg.learning_rate)
    rng = np.random.default_rng(streams[2])

    bs = cfg.batch_size
    n_src_b = (bs + 1) // 2 if pool else bs
    n_tgt_b = bs // 2 if pool else 0
    weight = cfg.mmd_weight if mode == "mmd" else cfg.gamma
    align = mode != "none" and bool(pool) and weight > 0
    history = []
    n = len(source)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for b, start in enumerate(range(0, n, n_src_b)):
            s_idx = order[start:start + n_src_b]
            t_idx = rng.integers(0, len(pool), size=n_tgt_b) if pool else np.empty(0, dtype=np.int64)
            if len(s_idx) + len(t_idx) < 2:
                continue
            samples = [source[i] for i in s_idx] + [pool[i] for i in t_idx]
            domains = np.concatenate([np.zeros(len(s_idx)), np.ones(len(t_idx))])
            labels = np.concatenate([src_labels[s_idx], pool_labels[t_idx]])
            labeled = np.concatenate([np.ones(len(s_idx), dtype=bool), pool_labeled[t_idx]])
            inputs = model.make_inputs(samples)
            rec = {"phase": 0, "epoch": epoch, "batch": b}

            # (1) generator + classifier step, discriminator held fixed
            set_stat_updates(model.discriminator, False)
            h = model.generator(inputs)
            loss = loss_classification(model.classifier(h), labels, domains, cfg.lam, labeled, reduction="mean")
            rec["L_c"] = float(loss.data)
            if align and mode == "adversarial":
                with constant_parameters(model.discriminator):
                    d_hat = domain_probability(model.discriminator(h))
                lg = loss_generator(d_hat, domains, reduction="mean")
                rec["L_g"] = float(lg.data)
                loss = loss + lg * cfg.gamma
            elif align and mode == "mmd":
                src_rows = np.flatnonzero(domains == 0)
                tgt_rows = np.flatnonzero(domains == 1)
                mmd = mmd_rbf(take_rows(h, src_rows), take_rows(h, tgt_rows))
                rec["mmd"] = float(mmd.data)
                loss = loss + mmd * cfg.mmd_weight
            opt_gc.zero_grad()
            loss.backward()
            opt_gc.step()
            set_stat_updates(model.discriminator, True)

            # (2) discriminator step on latents of the updated generator
            if mode == "adversarial" and pool:
                set_stat_updates(model.generator, False)
                h2 = Tensor(model.generator(inputs).data)
                set_stat_updates(model.generator, True)
                ld = loss_discriminator(domain_probability(model.discriminator(h2)), domains, reduction="mean")
                rec["L_d"] = float(ld.data)
                opt_d.zero_grad()
                ld.backward()
                opt_d.step()
            history.append(rec)
    model.eval()
    return TrainResult(model, history)


def train_cold(target_labeled, cfg):
    """Fresh model trained on the labeled target subset only."""
    return train_supervised(list(target_labeled), cfg)


def train_warm(source, target_labeled, cfg, phase2_epochs=None):
    """Source training, then fine-tuning on target labels with the first generator layer frozen."""
    if not target_labeled:
        raise ValueError("warm start needs labeled target samples")
    first = train_supervised(source, cfg)
    phase1_state = {k: v.copy() for k, v in first.model.state().items()}
    model = first.model
    model.train()
    frozen = model.generator.layers[0] if hasattr(model.generator, "layers") else None
    if frozen is not None:
        frozen.freeze()
    opt = Adam(model.generator.trainable_parameters() + model.classifier.trainable_parameters(),
               lr=cfg.learning_rate)
    rng = np.random.default_rng(_streams(cfg.seed)[2].spawn(1)[0])
    labels = np.array([_label(s) for s in target_labeled])
    history = list(first.history)
    _supervised_epochs(model, opt, list(target_labeled), labels, cfg, rng,
                       cfg.epochs if phase2_epochs is None else phase2_epochs, history, phase=1)
    model.eval()
    return TrainResult(model, history, phase1=phase1_state)


def train(mode, source, target_labeled, target_unlabeled, cfg):
    """Dispatch on the experiment mode name (adv, mmd, warm, cold, none)."""
    from dataclasses import replace

    if mode in ("adv", "adversarial"):
        return train_adversarial(source, target_labeled, target_unlabeled, replace(cfg, alignment_mode="adversarial"))
    if mode == "mmd":
        return train_adversarial(source, target_labeled, target_unlabeled, replace(cfg, alignment_mode="mmd"))
    if mode == "none":
        return train_adversarial(source, target_labeled, target_unlabeled, replace(cfg, alignment_mode="none"))
    if mode == "warm":
        return train_warm(source, target_labeled, cfg)
    if mode == "cold":
        return train_cold(target_labeled, cfg)
    raise ValueError(f"unknown training mode {mode!r}")


def discriminator_accuracy(model, source_samples, target_samples):
    """Balanced accuracy of the domain discriminator on held-out latents."""
    accs = []
    for samples, dom in ((source_samples, 0), (target_samples, 1)):
        if not samples:
            continue
        p = model.domain_scores(model.forward_latent(samples))
        pred = (p > 0.5).astype(int)
        accs.append(float(np.mean(pred == dom)))
    return float(np.mean(accs)) if accs else float("nan")
