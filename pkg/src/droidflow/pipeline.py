"""Per-app feature extraction and on-disk artifact layout.

extract_app turns one loaded app into its flow graph, trace sequences and
row matrix; extract_batch walks a dataset root (one subdirectory per app)
and writes, per app: nodes.csv, edges.csv, traces.csv, matrix.csv and
report.json. Batch failures are per-app report entries, never aborts.
"""

import json
from dataclasses import dataclass, field
from importlib.resources import files as package_files
from pathlib import Path

from .apimine import CriticalApiSet, load_critical_apis
from .appmodel import AppModel, EmptyAppError, load_app
from .callgraph import build_call_graph
from .flowgraph import AbstractFlowGraph, build_flow_graph, deserialize_graph, serialize_graph
from .icc import DEFAULT_INTENT_SENDERS
from .nn.model import Hyperparams, TrainConfig
from .traces import (
    DEFAULT_MAX_DEPTH,
    DEFAULT_MAX_TRACES_PER_ENTRY,
    DEFAULT_OPCODE_BUDGET,
    EmptyMatrixError,
    SequenceMatrix,
    build_matrix,
    find_call_traces,
    sample_opcodes,
    with_opcode_seqs,
)


class ConfigError(ValueError):
    pass


def _data_file(name: str) -> Path:
    return Path(str(package_files("droidflow") / "data" / name))


def load_lifecycle_table(path=None) -> dict:
    path = path or _data_file("lifecycle_methods.txt")
    table = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        category, method = line.split()
        table.setdefault(category, []).append(method)
    return {k: tuple(v) for k, v in table.items()}


def load_name_list(path) -> tuple:
    lines = Path(path).read_text().splitlines()
    return tuple(
        line.strip() for line in lines if line.strip() and not line.startswith("#")
    )


@dataclass
class PipelineConfig:
    critical_apis_path: Path | None = None
    lifecycle_path: Path | None = None
    callbacks_path: Path | None = None
    intent_senders_path: Path | None = None
    hyper: Hyperparams = field(default_factory=Hyperparams)
    train: TrainConfig = field(default_factory=TrainConfig)
    max_depth: int = DEFAULT_MAX_DEPTH
    max_traces_per_entry: int = DEFAULT_MAX_TRACES_PER_ENTRY
    opcode_budget: int = DEFAULT_OPCODE_BUDGET

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, base=Path(path).parent)

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "PipelineConfig":
        known = {
            "critical_apis", "lifecycle", "callbacks", "intent_senders",
            "hyperparams", "train", "caps", "opcode_budget",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        def resolve(key):
            if key not in data:
                return None
            p = (base / data[key]).resolve()
            if not p.exists():
                raise ConfigError(f"config path for {key} does not exist: {p}")
            return p

        caps = data.get("caps", {})
        return cls(
            critical_apis_path=resolve("critical_apis"),
            lifecycle_path=resolve("lifecycle"),
            callbacks_path=resolve("callbacks"),
            intent_senders_path=resolve("intent_senders"),
            hyper=Hyperparams(**data.get("hyperparams", {})),
            train=TrainConfig(**data.get("train", {})),
            max_depth=caps.get("max_depth", DEFAULT_MAX_DEPTH),
            max_traces_per_entry=caps.get("max_traces_per_entry", DEFAULT_MAX_TRACES_PER_ENTRY),
            opcode_budget=data.get("opcode_budget", DEFAULT_OPCODE_BUDGET),
        )

    def critical_apis(self) -> CriticalApiSet:
        return load_critical_apis(self.critical_apis_path or _data_file("critical_apis.txt"))

    def lifecycle(self) -> dict:
        return load_lifecycle_table(self.lifecycle_path)

    def callbacks(self) -> tuple:
        return load_name_list(self.callbacks_path or _data_file("callback_methods.txt"))

    def intent_senders(self) -> frozenset:
        if self.intent_senders_path is None:
            return DEFAULT_INTENT_SENDERS
        return frozenset(load_name_list(self.intent_senders_path))


@dataclass
class ExtractResult:
    app_id: str
    graph: AbstractFlowGraph
    matrix: SequenceMatrix
    raw_sequences: list          # unsampled per-trace opcode sequences
    report: dict


def extract_app(app: AppModel, critical: CriticalApiSet, config: PipelineConfig) -> ExtractResult:
    cg = build_call_graph(
        app,
        lifecycle=config.lifecycle(),
        callbacks=config.callbacks(),
        intent_senders=config.intent_senders(),
    )
    traces = find_call_traces(
        cg, critical,
        max_depth=config.max_depth,
        max_traces_per_entry=config.max_traces_per_entry,
    )
    traces = with_opcode_seqs(traces, app, cg)
    sampled = sample_opcodes(traces, config.opcode_budget, config.hyper.seq_len)
    total_raw = sum(len(t.opcode_seq) for t in traces)
    empty_matrix = False
    try:
        matrix = build_matrix(sampled, config.hyper.seq_len)
    except EmptyMatrixError:
        matrix = SequenceMatrix.empty(config.hyper.seq_len)
        empty_matrix = True
    graph, flow_diags = build_flow_graph(
        app, cg, traces,
        label_dim=config.hyper.label_dim,
        intent_senders=config.intent_senders(),
    )
    report = {
        "app_id": app.app_id,
        "label": app.metadata.get("label"),
        "timestamp": app.metadata.get("timestamp"),
        "classes": len(app.classes),
        "components": len(app.components),
        "entry_points": len(cg.entry_points),
        "call_graph_nodes": len(cg.nodes),
        "icc_edges": len(cg.icc_edges),
        "trace_count": len(traces),
        "total_trace_opcodes": total_raw,
        "sampling_applied": total_raw > config.opcode_budget,
        "matrix_rows": matrix.n,
        "empty_matrix": empty_matrix,
        "graph_nodes": len(graph.nodes),
        "graph_edges": len(graph.edges),
        "diagnostics": sorted(set(app.diagnostics + cg.diagnostics + flow_diags)),
        "status": "ok",
    }
    return ExtractResult(app.app_id, graph, matrix,
                         [t.opcode_seq for t in traces], report)


def write_features(result: ExtractResult, out_dir) -> Path:
    app_dir = Path(out_dir) / result.app_id
    app_dir.mkdir(parents=True, exist_ok=True)
    serialize_graph(result.graph, app_dir)
    result.matrix.save_csv(app_dir / "matrix.csv")
    lines = ["|".join(str(c) for c in seq) for seq in result.raw_sequences]
    (app_dir / "traces.csv").write_text("".join(line + "\n" for line in lines))
    (app_dir / "report.json").write_text(
        json.dumps(result.report, sort_keys=True, indent=2) + "\n"
    )
    return app_dir


def _extract_one(app_path, out_dir, critical, config):
    try:
        app = load_app(app_path)
        result = extract_app(app, critical, config)
        write_features(result, out_dir)
        return result.report
    except (EmptyAppError, ValueError) as exc:
        return {"app_id": Path(app_path).name, "status": "failed", "error": str(exc)}


def extract_batch(dataset_root, out_dir, critical: CriticalApiSet, config: PipelineConfig,
                  workers: int = 1):
    """Extract every app directory under dataset_root; one report entry each.

    Apps are independent, so workers > 1 fans extraction out over processes;
    reports keep app-path order either way."""
    dataset_root = Path(dataset_root)
    app_paths = sorted(p for p in dataset_root.iterdir() if p.is_dir())
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(
                pool.map(_extract_one, app_paths,
                         [out_dir] * len(app_paths),
                         [critical] * len(app_paths),
                         [config] * len(app_paths))
            )
    else:
        reports = [_extract_one(p, out_dir, critical, config) for p in app_paths]
    summary = Path(out_dir) / "extraction_report.json"
    summary.parent.mkdir(parents=True, exist_ok=True)
    summary.write_text(json.dumps(reports, sort_keys=True, indent=2) + "\n")
    return reports


# --- feature loading for train / tune / predict --------------------------------

@dataclass
class FeatureRecord:
    app_id: str
    path: Path
    label: int | None
    timestamp: str | None
    raw_sequences: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.metadata = {"label": self.label, "timestamp": self.timestamp}

    def graph(self, label_dim: int) -> AbstractFlowGraph:
        return deserialize_graph(self.path, label_dim)

    def matrix(self, seq_len: int, opcode_budget: int) -> SequenceMatrix:
        from .traces import CallTrace

        traces = [
            CallTrace(methods=("?",), critical_api="?", site_offset=0, opcode_seq=seq)
            for seq in self.raw_sequences
        ]
        sampled = sample_opcodes(traces, opcode_budget, seq_len)
        try:
            return build_matrix(sampled, seq_len)
        except EmptyMatrixError:
            return SequenceMatrix.empty(seq_len)


def load_features(features_dir) -> list:
    """FeatureRecords for every extracted app, sorted by app id."""
    features_dir = Path(features_dir)
    records = []
    for app_dir in sorted(p for p in features_dir.iterdir() if p.is_dir()):
        report_path = app_dir / "report.json"
        if not report_path.exists():
            continue
        report = json.loads(report_path.read_text())
        if report.get("status") != "ok":
            continue
        raw = []
        traces_path = app_dir / "traces.csv"
        if traces_path.exists():
            for line in traces_path.read_text().splitlines():
                if line:
                    raw.append([int(x) for x in line.split("|")])
        label = report.get("label")
        records.append(
            FeatureRecord(
                app_id=report["app_id"],
                path=app_dir,
                label={"benign": 0, "malicious": 1}.get(label),
                timestamp=report.get("timestamp"),
                raw_sequences=raw,
            )
        )
    return records


def build_dataset(records, hyper: Hyperparams, opcode_budget: int = DEFAULT_OPCODE_BUDGET):
    """(graph, matrix, label) triples for training; records must be labeled."""
    dataset = []
    for rec in records:
        if rec.label is None:
            raise ConfigError(f"feature record {rec.app_id} has no label")
        dataset.append(
            (rec.graph(hyper.label_dim), rec.matrix(hyper.seq_len, opcode_budget), rec.label)
        )
    return dataset
