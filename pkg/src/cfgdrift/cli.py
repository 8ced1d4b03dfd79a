"""Command-line entry point."""
import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        w.writerows(rows)


def _read_matrix(path):
    path = str(path)
    if path.endswith(".npy"):
        return np.load(path)
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _read_labels(path):
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if rows and not rows[0][-1].lstrip("-").isdigit():
        rows = rows[1:]
    return np.array([int(r[-1]) for r in rows])


def _load_graphs(manifest, n_classes=None, embedder="hash", dim=64, table=None):
    from .cfg import extract_cfg
    from .features import AttributedGraph, featurize_cfg, make_embedder
    from .harness.manifest import read_manifest, resolve_path

    records = read_manifest(manifest)
    base = Path(manifest).resolve().parent
    n_classes = n_classes or max(r.label for r in records) + 1
    emb = None
    graphs = []
    for r in records:
        try:
            path = resolve_path(r, base)
        except FileNotFoundError:
            path = resolve_path(r)
        if path.suffix == ".json":
            g = AttributedGraph.load(path)
        else:
            emb = emb or make_embedder(embedder, table=table, dim=dim)
            g = featurize_cfg(extract_cfg(path.read_text(errors="replace"), r.sample_id), emb,
                              label=r.label, n_classes=n_classes)
        g.sample_id = r.sample_id
        g.meta = {**g.meta, "family": r.family}
        graphs.append(g)
    return records, graphs


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _inputs(path, patterns):
    path = Path(path)
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise FileNotFoundError(f"no such file or directory: {path}")
    files = sorted(f for pat in patterns for f in path.glob(pat))
    if not files:
        raise FileNotFoundError(f"no {'/'.join(patterns)} files in {path}")
    return files


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_extract(args):
    from .cfg import extract_cfg

    out = _out_dir(args.out)
    for f in _inputs(args.input, ("*.asm", "*.txt", "*.lst")):
        cfg = extract_cfg(f.read_text(errors="replace"), f.stem)
        (out / f"{f.stem}.json").write_text(cfg.to_json())
        print(f"{f.stem}: {len(cfg.blocks)} blocks, {len(cfg.edges)} edges")


def cmd_featurize(args):
    from .cfg import RawCfg
    from .features import featurize_cfg, make_embedder

    out = _out_dir(args.out)
    emb = make_embedder(args.embedder, table=args.table, dim=args.dim, seed=args.seed)
    for f in _inputs(args.cfg_dir, ("*.json",)):
        cfg = RawCfg.from_json(f.read_text())
        cfg.sample_id = cfg.sample_id or f.stem
        g = featurize_cfg(cfg, emb, label=args.label, domain=args.domain, n_classes=args.n_classes)
        g.save(out / f"{f.stem}.json")
        print(f"{f.stem}: X {g.X.shape}, {int(g.A.sum())} edges")


def cmd_featurize_content(args):
    from .features import extract_content_features, load_vocab

    vocab = load_vocab(args.vocab)
    rows, names = [], None
    for f in _inputs(args.asm_dir, ("*.asm", "*.txt", "*.lst")):
        vec = extract_content_features(f.read_text(errors="replace"), vocab)
        names = list(vec.names)
        rows.append([f.stem] + [repr(float(v)) for v in vec.values])
    _write_csv(args.out, ["sample_id"] + names, rows)
    print(f"{len(rows)} samples x {len(names)} features")


def cmd_synth(args):
    from .harness.manifest import write_manifest
    from .harness.synth import SynthParams, synth_drift

    p = SynthParams(seed=args.seed, drift=args.drift, n_source=args.n_source, n_target=args.n_target,
                    n_families=args.families, label_mode=args.label_mode, benign_ratio=args.benign_ratio)
    ds = synth_drift(p)
    out = Path(args.out)
    (out / "graphs").mkdir(parents=True, exist_ok=True)
    recs = {"source": [], "target": []}
    for g, rec in zip(ds.graphs, ds.records):
        g.save(out / "graphs" / f"{g.sample_id}.json")
        recs[rec["domain"]].append({**rec, "path": f"graphs/{g.sample_id}.json"})
    write_manifest(recs["source"], out / "source.jsonl")
    write_manifest(recs["target"], out / "target.jsonl")
    write_manifest(recs["source"] + recs["target"], out / "all.jsonl")
    print(f"{len(ds.graphs)} graphs written to {out}")


def cmd_train(args):
    from dataclasses import replace

    from .da.model import save_model
    from .da.train import TrainConfig, train
    from .harness.experiment import load_config, train_config_from
    from .harness.splits import sample_budget

    _, source = _load_graphs(args.source) if args.source else (None, [])
    target = []
    if args.target:
        _, target = _load_graphs(args.target)
    n_classes = args.n_classes or max(g.label for g in source + target) + 1
    cfg = train_config_from(load_config(args.config), args.seed, n_classes) if args.config \
        else TrainConfig(seed=args.seed, n_classes=n_classes)
    if args.epochs is not None:
        cfg = replace(cfg, epochs=args.epochs)
    rng = np.random.default_rng(args.seed)
    labeled, unlabeled = sample_budget(target, args.budget, rng) if target else ([], [])
    result = train(args.mode, source, labeled, unlabeled, cfg)
    save_model(result.model, args.out, {"train": cfg.to_dict(), "mode": args.mode})
    hist = args.history or str(Path(args.out).with_suffix(".history.csv"))
    keys = ["phase", "epoch", "batch", "L_c", "L_g", "L_d", "mmd"]
    _write_csv(hist, keys, [["" if h.get(k) is None else h[k] for k in keys] for h in result.history])
    print(f"saved {args.out} ({len(result.history)} batches)")


def cmd_evaluate(args):
    from .da.model import load_model
    from .harness.metrics import evaluate

    model, _ = load_model(args.model)
    _, graphs = _load_graphs(args.test, model.n_classes)
    rep = evaluate(model, graphs)
    if args.latents_out:
        Z = model.forward_latent(graphs)
        _write_csv(args.latents_out, ["sample_id"] + [f"z{i}" for i in range(Z.shape[1])],
                   [[g.sample_id] + [repr(float(v)) for v in z] for g, z in zip(graphs, Z)])
    text = json.dumps(rep, indent=2)
    if args.report:
        Path(args.report).write_text(text + "\n")
    print(text)


def cmd_cluster(args):
    from .clustering import consensus_cluster, embed_graphs
    from .features import AttributedGraph

    files = sorted(Path(args.graphs).glob("*.json"))
    if not files:
        raise SystemExit(f"no graph files in {args.graphs}")
    graphs = [AttributedGraph.load(f) for f in files]
    ids = [g.sample_id or f.stem for g, f in zip(graphs, files)]
    emb = embed_graphs(graphs, epochs=args.epochs, seed=args.seed)
    orig = _read_labels(args.orig_labels) if args.orig_labels else None
    res = consensus_cluster(emb, args.predictors.split(","), orig, seed=args.seed)
    _write_csv(args.out, ["sample_id", "cluster"], zip(ids, res.assignment.labels.tolist()))
    if args.embeddings_out:
        _write_csv(args.embeddings_out, ["sample_id"] + [f"e{i}" for i in range(emb.shape[1])],
                   [[i] + [repr(float(v)) for v in row] for i, row in zip(ids, emb)])
    print(f"k={res.assignment.k} silhouette={res.assignment.silhouette:.4f}")


def cmd_indices(args):
    from .clustering import all_indices

    print(json.dumps(all_indices(_read_matrix(args.points), _read_labels(args.labels)), indent=2))


def cmd_openset(args):
    from .openset import OcSvm, detect, ocsvm_train, openset_metrics, relabel_unknown

    if args.action == "train":
        model = ocsvm_train(_read_matrix(args.latents), nu=args.nu, gamma=args.gamma)
        model.save(args.out)
        print(f"{len(model.alpha)} support vectors, rho={model.rho:.6g}")
        return
    from .da.model import load_model

    clf, _ = load_model(args.model)
    oc = OcSvm.load(args.ocsvm)
    records, graphs = _load_graphs(args.test, clf.n_classes)
    probs = clf.classify(graphs)
    verdicts = detect(oc, clf.forward_latent(graphs))
    final = relabel_unknown(probs, verdicts)
    seen = set(args.seen_families.split(",")) if args.seen_families else None
    unseen = [r.family not in seen if seen is not None else bool(r.extra.get("unseen", False)) for r in records]
    met = openset_metrics(final, unseen, benign=args.benign)
    out = {"metrics": met.to_dict(),
           "predictions": [{"sample_id": r.sample_id, "label": lab} for r, lab in zip(records, final)]}
    Path(args.report).write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(met.to_dict()))


def cmd_report(args):
    from .harness.metrics import aggregate

    rows = []
    for d in args.runs:
        rows.extend(json.loads((Path(d) / "report.json").read_text())["runs"])
    cells = sorted({(r["mode"], r["budget"]) for r in rows})
    table = []
    for mode, budget in cells:
        agg = aggregate([r for r in rows if r["mode"] == mode and r["budget"] == budget])
        table.append([mode, budget, agg["runs"], f"{agg['accuracy']:.4f}", f"{agg['f1']:.4f}"])
    header = ["mode", "budget", "runs", "accuracy", "f1"]
    if args.out:
        _write_csv(args.out, header, table)
    print(",".join(header))
    for row in table:
        print(",".join(str(v) for v in row))


def cmd_experiment(args):
    from .harness.experiment import load_config, run_experiment

    cfg = load_config(args.config)
    report = run_experiment(cfg, out_dir=args.out, log=(lambda r: print(json.dumps(r))) if args.verbose else None)
    for s in report["summary"]:
        print(f"{s['mode']:>5} budget={s['budget']:<4} acc={s['accuracy']:.4f} f1={s['f1']:.4f}")


def build_parser():
    ap = argparse.ArgumentParser(prog="cfgdrift", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="listings -> CFG json files")
    p.add_argument("--in", dest="input", required=True, help="listing file or directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=["json"], default="json")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("featurize", help="CFG json files -> attributed graph json files")
    p.add_argument("--cfg-dir", required=True)
    p.add_argument("--embedder", choices=["table", "magic", "hash"], default="hash")
    p.add_argument("--table")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label", type=int, default=0)
    p.add_argument("--domain", type=int, default=0)
    p.add_argument("--n-classes", type=int, default=2)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("featurize-content", help="listings -> content feature CSV")
    p.add_argument("--asm-dir", required=True)
    p.add_argument("--vocab")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize_content)

    p = sub.add_parser("synth", help="write the synthetic two-domain benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drift", type=float, default=1.0)
    p.add_argument("--n-source", type=int, default=200)
    p.add_argument("--n-target", type=int, default=400)
    p.add_argument("--families", type=int, default=3)
    p.add_argument("--label-mode", choices=["family", "binary"], default="family")
    p.add_argument("--benign-ratio", type=float, default=1.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--mode", choices=["adv", "mmd", "warm", "cold", "none"], required=True)
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--epochs", type=int)
    p.add_argument("--n-classes", type=int)
    p.add_argument("--history")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="metrics of a checkpoint on a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--latents-out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cluster", help="GAE embeddings + consensus clustering")
    p.add_argument("--graphs", required=True)
    p.add_argument("--predictors", default="kmeans,gmm,density")
    p.add_argument("--orig-labels")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embeddings-out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("indices", help="silhouette, Calinski-Harabasz and Davies-Bouldin")
    p.add_argument("--points", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_indices)

    p = sub.add_parser("openset", help="one-class SVM outlier detection")
    osub = p.add_subparsers(dest="action", required=True)
    t = osub.add_parser("train")
    t.add_argument("--latents", required=True)
    t.add_argument("--nu", type=float, default=0.1)
    t.add_argument("--gamma", type=float)
    t.add_argument("--out", required=True)
    e = osub.add_parser("eval")
    e.add_argument("--model", required=True)
    e.add_argument("--ocsvm", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--seen-families")
    e.add_argument("--benign", type=int, default=0)
    e.add_argument("--report", required=True)
    p.set_defaults(func=cmd_openset)

    p = sub.add_parser("report", help="merge experiment reports")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("experiment", help="run a key=value experiment config")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
