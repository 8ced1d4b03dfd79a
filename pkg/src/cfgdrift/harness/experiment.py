"""Config-driven experiment runner: split -> train(mode) -> evaluate, over budgets and seeds."""
import csv
import io
import json
from dataclasses import fields
from pathlib import Path

from ..cfg import extract_cfg
from ..da.train import TrainConfig, discriminator_accuracy, train
from ..features import AttributedGraph, EmbeddingTable, featurize_cfg, make_embedder
from .manifest import ManifestRecord, read_manifest, resolve_path, workspace_root
from .metrics import aggregate, evaluate
from .splits import SplitSpec, split
from .synth import SynthParams, synth_drift

DEFAULT_BUDGETS = (20, 50, 100, 200, 300, 500)
DEFAULT_SEEDS = (1, 2, 3, 4, 5)
MODE_NAMES = ("adv", "mmd", "warm", "cold", "none")


class ExperimentError(RuntimeError):
    def __init__(self, stage, sample_id, cause):
        where = f" (sample {sample_id})" if sample_id else ""
        super().__init__(f"stage {stage} failed{where}: {cause}")
        self.stage = stage
        self.sample_id = sample_id


def parse_config(text):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        cfg[key.strip()] = value.strip()
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _list(value, cast):
    if isinstance(value, (list, tuple)):
        return [cast(v) for v in value]
    return [cast(v) for v in str(value).split(",") if v.strip()]


def _coerce(value, typ):
    if typ is bool:
        return str(value).lower() in ("1", "true", "yes", "on")
    return typ(value)


def train_config_from(cfg, seed, n_classes):
    kw = {}
    for f in fields(TrainConfig):
        if f.name in cfg and f.name not in ("seed", "n_classes"):
            kw[f.name] = _coerce(cfg[f.name], type(f.default))
    return TrainConfig(seed=seed, n_classes=n_classes, **kw)


def synth_params_from(cfg):
    kw = {}
    for f in fields(SynthParams):
        key = "synth_" + f.name
        if key in cfg:
            kw[f.name] = _coerce(cfg[key], type(f.default))
    return SynthParams(**kw)


def load_dataset(cfg):
    """Returns (records, graphs by sample_id, n_classes)."""
    source = cfg.get("data", "synth")
    if source == "synth":
        ds = synth_drift(synth_params_from(cfg))
        records = [ManifestRecord.from_dict(r) for r in ds.records]
        return records, {g.sample_id: g for g in ds.graphs}, ds.params.n_classes

    paths = _list(cfg.get("manifest", ""), str)
    if not paths:
        raise ExperimentError("load", None, "no manifest given")
    records = []
    for p in paths:
        records.extend(read_manifest(resolve_path(ManifestRecord("manifest", p))))
    n_classes = int(cfg.get("n_classes", max(r.label for r in records) + 1))
    table = EmbeddingTable.load(cfg["embed_table"]) if cfg.get("embed_table") else None
    embedder = make_embedder(cfg.get("embedder", "hash"), table=table,
                             dim=int(cfg.get("embed_dim", 64)), seed=int(cfg.get("embed_seed", 0)))
    base = Path(cfg["data_root"]) if cfg.get("data_root") else workspace_root()
    graphs = {}
    for r in records:
        stage = "extract"
        try:
            path = resolve_path(r, base)
            if path.suffix == ".json":
                g = AttributedGraph.load(path)
            else:
                cfg_graph = extract_cfg(path.read_text(encoding="utf-8", errors="replace"), r.sample_id)
                stage = "featurize"
                g = featurize_cfg(cfg_graph, embedder, label=r.label,
                                  domain=1 if r.domain == "target" else 0, n_classes=n_classes)
            g.sample_id = r.sample_id
            graphs[r.sample_id] = g
        except Exception as exc:  # noqa: BLE001 - re-raised with stage context
            raise ExperimentError(stage, r.sample_id, exc) from exc
    return records, graphs, n_classes


def _history_csv(history):
    keys = ["phase", "epoch", "batch", "L_c", "L_g", "L_d", "mmd"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for rec in history:
        w.writerow(["" if rec.get(k) is None else _fmt(rec[k]) for k in keys])
    return buf.getvalue()


def _fmt(x):
    return repr(float(x)) if isinstance(x, float) else str(x)


def run_experiment(cfg, out_dir=None, log=None):
    """Run every (mode, budget, seed) cell and write report.csv, summary.csv, report.json."""
    if isinstance(cfg, (str, Path)):
        cfg = load_config(cfg)
    cfg = dict(cfg)
    modes = _list(cfg.get("modes", "adv,mmd,warm,cold"), str)
    for m in modes:
        if m not in MODE_NAMES:
            raise ExperimentError("config", None, f"unknown mode {m!r}")
    budgets = _list(cfg.get("budgets", DEFAULT_BUDGETS), int)
    seeds = _list(cfg.get("seeds", DEFAULT_SEEDS), int)
    out = Path(out_dir or cfg.get("out_dir", "reports"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "histories").mkdir(exist_ok=True)

    try:
        records, graphs, n_classes = load_dataset(cfg)
    except ExperimentError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise ExperimentError("load", None, exc) from exc

    rows = []
    for budget in budgets:
        for seed in seeds:
            try:
                spec = SplitSpec(mode=cfg.get("split_mode", "fixed"), holdout=cfg.get("holdout"),
                                 source_train=float(cfg.get("source_train", 0.75)),
                                 target_train=float(cfg.get("target_train", 0.5)),
                                 budget=budget, seed=seed)
                parts = split(records, spec)
            except Exception as exc:  # noqa: BLE001
                raise ExperimentError("split", None, exc) from exc

            def pick(recs):
                return [graphs[r.sample_id] for r in recs]

            s_tr, s_te = pick(parts.source_train), pick(parts.source_test)
            t_lab, t_unl, t_te = pick(parts.target_labeled), pick(parts.target_unlabeled), pick(parts.target_test)
            tcfg = train_config_from(cfg, seed, n_classes)
            for mode in modes:
                try:
                    result = train(mode, s_tr, t_lab, t_unl, tcfg)
                except Exception as exc:  # noqa: BLE001
                    raise ExperimentError(f"train:{mode}", None, exc) from exc
                try:
                    rep = evaluate(result.model, t_te)
                    disc = discriminator_accuracy(result.model, s_te, t_te) if mode == "adv" else None
                except Exception as exc:  # noqa: BLE001
                    raise ExperimentError(f"evaluate:{mode}", None, exc) from exc
                row = {"mode": mode, "budget": budget, "seed": seed, "accuracy": rep["accuracy"],
                       "f1": rep["f1"], "disc_accuracy": disc, "n_test": rep["n"]}
                rows.append(row)
                (out / "histories" / f"{mode}_b{budget}_s{seed}.csv").write_text(_history_csv(result.history))
                if log:
                    log(row)

    summary = []
    for mode in modes:
        for budget in budgets:
            cell = [r for r in rows if r["mode"] == mode and r["budget"] == budget]
            agg = aggregate(cell)
            discs = [r["disc_accuracy"] for r in cell if r["disc_accuracy"] is not None]
            agg["disc_accuracy"] = sum(discs) / len(discs) if discs else None
            summary.append({"mode": mode, "budget": budget, **agg})

    _write_csv(out / "report.csv", rows, ["mode", "budget", "seed", "accuracy", "f1", "disc_accuracy", "n_test"])
    _write_csv(out / "summary.csv", summary,
               ["mode", "budget", "runs", "accuracy", "accuracy_std", "f1", "f1_std", "disc_accuracy"])
    report = {"config": cfg, "modes": modes, "budgets": budgets, "seeds": seeds, "runs": rows, "summary": summary}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _write_csv(path, rows, keys):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow(["" if r.get(k) is None else _fmt(r[k]) for k in keys])
    Path(path).write_text(buf.getvalue())
