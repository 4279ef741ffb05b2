"""Command-line pipeline: mine-apis, extract, train, tune, predict, evaluate.

Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical divergence.
All commands are deterministic given the same inputs and seed.
"""

import argparse
import json
import sys
from pathlib import Path

from .apimine import (
    ApiDoc,
    EmptyCorpusError,
    load_corpus_dir,
    load_stopwords,
    match_critical_apis,
    merge_tool_lists,
    rank_keywords,
    save_critical_apis,
    select_top,
)
from .appmodel import EmptyAppError
from .flowgraph import FormatError
from .manifest import AxmlUnsupportedError, XmlError
from .metrics import LengthMismatchError, compute_metrics
from .nn.model import ModelMismatchError, load_model, predict, save_model, score
from .nn.train import DivergedLossError, train
from .pipeline import (
    ConfigError,
    PipelineConfig,
    _data_file,
    build_dataset,
    extract_batch,
    load_features,
)
from .tuning import SEARCH_SPACE, grid_search, grid_to_csv, split_dataset


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.from_json(args.config)
    return PipelineConfig()


def cmd_mine_apis(args) -> int:
    corpus = load_corpus_dir(args.corpus)
    if not corpus:
        raise EmptyCorpusError(f"no corpus documents under {args.corpus}")
    stopwords = load_stopwords(args.stopwords or _data_file("stopwords.txt"))
    ranked = rank_keywords(corpus, stopwords)
    top = select_top(ranked, args.top_keywords)
    docs_raw = json.loads(Path(args.api_docs).read_text())
    docs = [ApiDoc(d["signature"], d.get("description", "")) for d in docs_raw]
    apis = match_critical_apis(docs, top, args.min_matches)
    for tool_file in args.tool_list or []:
        tool_apis = [
            line.strip()
            for line in Path(tool_file).read_text().splitlines()
            if line.strip() and not line.startswith("#")
        ]
        apis = merge_tool_lists(tool_apis, top, apis)
    save_critical_apis(apis, args.out)
    print(f"wrote {len(apis)} critical APIs to {args.out}")
    return 0


def cmd_extract(args) -> int:
    config = _config(args)
    critical = config.critical_apis()
    reports = extract_batch(args.apps, args.out, critical, config, workers=args.workers)
    failed = sum(1 for r in reports if r.get("status") != "ok")
    print(f"extracted {len(reports) - failed}/{len(reports)} apps into {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _config(args)
    if args.seed is not None:
        config.train = type(config.train)(
            learning_rate=config.train.learning_rate, seed=args.seed
        )
    records = load_features(args.features)
    labeled = [r for r in records if r.label is not None]
    if not labeled:
        raise ConfigError(f"no labeled features under {args.features}")
    dataset = build_dataset(labeled, config.hyper, config.opcode_budget)
    result = train(dataset, config.hyper, config.train)
    save_model(result.params, args.out)
    loss_path = Path(args.out).with_suffix(".losses.csv")
    lines = ["epoch,loss"] + [f"{i},{v!r}" for i, v in enumerate(result.epoch_losses)]
    loss_path.write_text("\n".join(lines) + "\n")
    print(f"trained {config.hyper.epochs} epochs; model at {args.out}")
    return 0


def _score_records(records, model, config):
    scores, labels = [], []
    for rec in records:
        features = (
            rec.graph(model.hyper.label_dim),
            rec.matrix(model.hyper.seq_len, config.opcode_budget),
        )
        scores.append(score(features, model, seed=config.train.seed))
        labels.append(rec.label)
    return scores, labels


def cmd_tune(args) -> int:
    config = _config(args)
    records = [r for r in load_features(args.features) if r.label is not None]
    if not records:
        raise ConfigError(f"no labeled features under {args.features}")
    train_set, val_set, _ = split_dataset(records, seed=config.train.seed)

    def evaluate(hp, train_items, val_items):
        dataset = build_dataset(train_items, hp, config.opcode_budget)
        result = train(dataset, hp, config.train)
        scores, labels = [], []
        for rec in val_items:
            features = (
                rec.graph(hp.label_dim),
                rec.matrix(hp.seq_len, config.opcode_budget),
            )
            scores.append(score(features, result.params, seed=config.train.seed))
            labels.append(rec.label)
        _, report = compute_metrics(scores, labels, args.threshold)
        return report

    space = SEARCH_SPACE
    if args.factor:
        unknown = set(args.factor) - set(SEARCH_SPACE)
        if unknown:
            raise UsageError(f"unknown tuning factors: {sorted(unknown)}")
        space = {k: SEARCH_SPACE[k] for k in args.factor}
    result = grid_search(
        train_set, val_set, evaluate, space=space, defaults=config.hyper,
        seed=config.train.seed, revalidate_top=args.revalidate_top,
    )
    Path(args.out).write_text(grid_to_csv(result))
    best = result.best
    print(f"best F1 {best.report.f1:.4f} at {best.hyper}")
    return 0


def cmd_predict(args) -> int:
    config = _config(args)
    model = load_model(args.model)
    records = load_features(args.features)
    lines = ["app_id,label,probability,malicious_score"]
    for rec in records:
        features = (
            rec.graph(model.hyper.label_dim),
            rec.matrix(model.hyper.seq_len, config.opcode_budget),
        )
        label, prob = predict(features, model, seed=config.train.seed)
        mal = score(features, model, seed=config.train.seed)
        lines.append(f"{rec.app_id},{label},{prob:.6f},{mal:.6f}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote predictions for {len(records)} apps to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    config = _config(args)
    if args.predictions:
        scores, labels = [], []
        text = Path(args.predictions).read_text().splitlines()
        header = text[0].split(",")
        try:
            s_col = header.index("score") if "score" in header else header.index("malicious_score")
            l_col = header.index("label")
        except ValueError as exc:
            raise ConfigError(f"predictions CSV needs score and label columns: {exc}") from exc
        for line in text[1:]:
            if not line:
                continue
            parts = line.split(",")
            scores.append(float(parts[s_col]))
            labels.append(int(parts[l_col]))
    else:
        if not args.model or not args.features:
            raise UsageError("evaluate needs --predictions or both --model and --features")
        model = load_model(args.model)
        records = [r for r in load_features(args.features) if r.label is not None]
        if not records:
            raise ConfigError(f"no labeled features under {args.features}")
        scores, labels = _score_records(records, model, config)
    confusion, report = compute_metrics(scores, labels, args.threshold)
    Path(args.out).write_text(report.to_json(confusion))
    print(f"accuracy {report.accuracy:.4f} F1 {report.f1:.4f} -> {args.out}")
    return 0


def make_parser() -> _Parser:
    parser = _Parser(prog="droidflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine-apis", help="rank corpus keywords and mine critical APIs")
    p.add_argument("--corpus", required=True, help="directory of corpus .txt documents")
    p.add_argument("--api-docs", required=True, help="JSON list of {signature, description}")
    p.add_argument("--tool-list", action="append", help="tool API list file (repeatable)")
    p.add_argument("--stopwords", help="stopword file (default: packaged list)")
    p.add_argument("--top-keywords", type=int, default=150)
    p.add_argument("--min-matches", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_mine_apis)

    p = sub.add_parser("extract", help="extract graphs and opcode matrices for a dataset")
    p.add_argument("--apps", required=True, help="root directory, one app per subdirectory")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--workers", type=int, default=1, help="parallel extraction processes")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("train", help="train the hybrid classifier on extracted features")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("tune", help="grid-search hyperparameters on 1/8 stratified subsets")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="grid CSV path")
    p.add_argument("--config")
    p.add_argument("--factor", action="append", help="restrict sweep to this factor (repeatable)")
    p.add_argument("--revalidate-top", type=int, default=3,
                   help="re-evaluate the top points on the full sets (0 disables)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("predict", help="label extracted apps with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("evaluate", help="compute metrics from a model or a predictions CSV")
    p.add_argument("--model")
    p.add_argument("--features")
    p.add_argument("--predictions", help="CSV with score and label columns")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(fn=cmd_evaluate)
    return parser


INPUT_ERRORS = (
    ConfigError,
    EmptyAppError,
    EmptyCorpusError,
    FormatError,
    ModelMismatchError,
    LengthMismatchError,
    XmlError,
    AxmlUnsupportedError,
    FileNotFoundError,
    NotADirectoryError,
    json.JSONDecodeError,
)


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except DivergedLossError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
