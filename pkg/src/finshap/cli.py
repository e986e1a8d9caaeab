"""Command-line front end: ``finshap {synthesize,train-eval,explain,validate}``.

Every command writes its resolved configuration to ``config.json`` in the
output directory; rerunning with ``--config <out>/config.json`` reproduces
the artifacts byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dataset import (
    LabeledDataset,
    PanelDataset,
    RatioSpec,
    SyntheticConfig,
    build_labels,
    compute_ratios,
    load_panel,
    split_by_year,
    synthesize_panel,
    write_panel,
)
from .errors import ConfigError, FinshapError
from .game import sample_background
from .metrics import evaluate
from .models import save_model, train_model
from .pipeline import (
    RankingReport,
    explain_dataset,
    group_frequency_histogram,
    per_class_ranking,
    positional_distribution,
    rank_by_topk_frequency,
    seeded_hyper,
    subset_validation,
    write_group_histogram_csv,
    write_json,
)
from .seeding import derive_seed

log = logging.getLogger("finshap")


@dataclass
class Data:
    panel: PanelDataset
    truth: dict | None


def load_data(cfg: RunConfig) -> Data:
    d = cfg.data
    if d.source == "synthetic":
        syn = SyntheticConfig.from_dict(d.synthetic)
        panel, truth = synthesize_panel(syn, cfg.seed)
        return Data(panel, truth.to_dict(panel.schema))
    return Data(load_panel(d.panel_csv, d.schema), None)


def ratio_spec(cfg: RunConfig) -> RatioSpec:
    return RatioSpec.default() if cfg.data.ratio_spec is None else RatioSpec.load(cfg.data.ratio_spec)


def labeled(cfg: RunConfig, panel: PanelDataset, feature_set: str) -> LabeledDataset:
    if feature_set == "raw":
        return build_labels(panel, cfg.data.roi_feature)
    return build_labels(panel, cfg.data.roi_feature, feature_panel=compute_ratios(panel, ratio_spec(cfg)))


def model_hyper(cfg: RunConfig, kind: str, hyper: dict | None):
    """Hyperparameters with the seed filled from the root seed unless set explicitly."""
    hyper = dict(hyper or {})
    return seeded_hyper(kind, hyper, hyper.get("seed", derive_seed(cfg.seed, "model")))


def prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(cfg.dumps(), encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


# --- commands -----------------------------------------------------------------


def cmd_synthesize(cfg: RunConfig, workers: int = 1) -> Path:
    if cfg.data.source != "synthetic":
        raise ConfigError("synthesize needs data.source = 'synthetic'")
    out = prepare_out(cfg)
    data = load_data(cfg)
    write_panel(data.panel, out / "panel.csv")
    data.panel.schema.save(out / "schema.json")
    write_json(out / "truth.json", data.truth)
    log.info("wrote %d rows x %d features to %s", len(data.panel), len(data.panel.schema), out)
    return out


def cmd_train_eval(cfg: RunConfig, workers: int = 1) -> Path:
    """Table-1-shaped grid: every configured model kind on raw and on ratio features."""
    out = prepare_out(cfg)
    panel = load_data(cfg).panel
    rows = []
    for fs in cfg.grid.feature_sets:
        split = split_by_year(labeled(cfg, panel, fs), cfg.split.train_last_year, cfg.split.test_year)
        for kind in cfg.grid.models:
            hyper = model_hyper(cfg, kind, cfg.grid.hyper.get(kind))
            model = train_model(kind, split.train.X, split.train.y, hyper, workers=workers)
            rep = evaluate(split.test.y, model.predict_proba(split.test.X))
            log.info("%s / %s: accuracy %.4f", kind, fs, rep.accuracy)
            rows.append(
                {
                    "model": kind,
                    "features": fs,
                    "n_features": int(split.train.X.shape[1]),
                    "n_train": len(split.train),
                    **rep.to_dict(),
                }
            )
    write_json(out / "table1.json", {"rows": rows})
    with open(out / "table1.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "features", "n_features", "accuracy", "roc_auc"])
        for r in rows:
            auc = "" if r["roc_auc"] is None else repr(r["roc_auc"])
            w.writerow([r["model"], r["features"], r["n_features"], repr(r["accuracy"]), auc])
    return out


RANKING_FILES = {"both": "ranking.json", 0: "ranking_class0.json", 1: "ranking_class1.json"}


def _explain(cfg: RunConfig, out: Path, workers: int) -> dict:
    panel = load_data(cfg).panel
    split = split_by_year(labeled(cfg, panel, "raw"), cfg.split.train_last_year, cfg.split.test_year)
    hyper = model_hyper(cfg, cfg.model.kind, cfg.model.hyper)
    model = train_model(cfg.model.kind, split.train.X, split.train.y, hyper, workers=workers)
    save_model(model, out / "model.json")
    test = split.test
    if cfg.attribution.max_instances is not None:
        test = test.take(np.arange(min(cfg.attribution.max_instances, len(test))))
    a = cfg.attribution
    background = sample_background(split.train.X, a.background_size, derive_seed(cfg.seed, "background"))
    attr = explain_dataset(
        model, test, background, a.method, a.budgets(test.X.shape[1]), derive_seed(cfg.seed, "explain"), workers, a.baseline
    )
    attr.save(out / "attributions.csv", out / "attributions.json")
    r = cfg.ranking
    rankings = {}
    for scope in ("both", 0, 1):
        k = min(r.k, attr.n_players)
        if scope == "both":
            rep = rank_by_topk_frequency(attr, k, scope, "Highest", r.absolute)
        else:
            rep = per_class_ranking(attr, k, scope, "Highest", r.absolute)
        write_json(out / RANKING_FILES[scope], rep.to_dict())
        rankings[scope] = rep
    worst = rank_by_topk_frequency(attr, min(r.n_worst, attr.n_players), r.class_scope, "Lowest", r.absolute)
    write_json(out / "ranking_worst.json", worst.to_dict())
    summary = {
        "model": model.to_dict()["kind"],
        "test": evaluate(test.y, model.predict_proba(test.X)).to_dict(),
        "n_instances": attr.n_instances,
        "n_players": attr.n_players,
        "method": attr.method,
        "budgets": attr.budgets,
        "max_evaluations_per_class": int(attr.evaluations.max()) if attr.n_instances else 0,
        "class_sum_max_abs": float(np.abs(attr.values.sum(axis=2)).max()) if attr.n_instances else 0.0,
    }
    if attr.method != "partition":
        schema = test.schema
        hist = group_frequency_histogram(attr, schema, min(r.group_k, attr.n_players), r.class_scope, r.absolute)
        write_group_histogram_csv(out / "group_histogram.csv", hist, schema)
        summary["group_histogram"] = hist
        pos = positional_distribution(
            attr, schema, min(r.k, attr.n_players), min(r.n_worst, attr.n_players), r.n_bins, r.class_scope, r.absolute
        )
        pos.to_csv(out / "positional.csv", schema)
    write_json(out / "explain_summary.json", summary)
    return rankings


def cmd_explain(cfg: RunConfig, workers: int = 1) -> Path:
    out = prepare_out(cfg)
    _explain(cfg, out, workers)
    return out


def _load_rankings(cfg: RunConfig, out: Path) -> dict | None:
    rankings = {}
    for scope, name in RANKING_FILES.items():
        path = out / name
        if not path.exists():
            return None
        rep = RankingReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
        if rep.class_scope != scope or rep.direction != "Highest":
            return None
        rankings[scope] = rep
    return rankings


def cmd_validate(cfg: RunConfig, workers: int = 1) -> Path:
    """Table-2-shaped report: all features, Top-n kept, bottom-m dropped, per ranking scope."""
    out = prepare_out(cfg)
    rankings = _load_rankings(cfg, out)
    if rankings is None:
        log.info("no ranking files in %s; running the explanation stage", out)
        rankings = _explain(cfg, out, workers)
    panel = load_data(cfg).panel
    split = split_by_year(labeled(cfg, panel, "raw"), cfg.split.train_last_year, cfg.split.test_year)
    hyper = model_hyper(cfg, cfg.model.kind, cfg.model.hyper)
    cache: dict = {}
    sections = {}
    for label, scope in (("class_0", 0), ("class_1", 1), ("combined", "both")):
        rep = subset_validation(
            split.train,
            split.test,
            rankings[scope],
            cfg.ranking.top_n,
            cfg.ranking.bottom_m,
            cfg.model.kind,
            hyper,
            seed=getattr(hyper, "seed", 0),
            workers=workers,
            cache=cache,
        )
        sections[label] = rep.to_dict()
    write_json(out / "table2.json", {"per_class": sections})
    with open(out / "table2.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ranking", "subset", "n_features", "accuracy", "roc_auc"])
        for label, sec in sections.items():
            for subset in ("all", "top", "all_minus_bottom"):
                auc = sec["roc_auc"][subset]
                w.writerow(
                    [label, subset, sec["sizes"][subset], repr(sec["accuracy"][subset]), "" if auc is None else repr(auc)]
                )
    return out


COMMANDS = {
    "synthesize": cmd_synthesize,
    "train-eval": cmd_train_eval,
    "explain": cmd_explain,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finshap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).splitlines()[0])
        p.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="root seed; overrides the config")
        p.add_argument("--workers", type=int, default=1, help="parallel workers (results do not depend on it)")
        p.add_argument("--out", help="output directory; overrides the config")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        out = COMMANDS[args.command](cfg, args.workers)
    except FinshapError as exc:
        print(f"finshap {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
