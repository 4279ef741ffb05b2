"""Abstract flow graph over code chunks with ten typed edge sets.

Methods are carved into chunks at user-defined and intent-sending call
sites. Forward edge types: critical-trace (ct), intent-sending (is),
neighbor (nb), inter-component (ic) and implicit-neighbor (in); every
forward edge is mirrored by a backward edge of the hatted type (bct, bis,
bnb, bic, bin). Neighbor edges are only built inside methods that issue a
ct/is/ic edge and are pruned when neither endpoint touches a non-neighbor
edge. Nodes persist as ``id,offset,opcode_seq,invoke_mtd`` quadruples and
edges as ``source,target,type`` triples.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dalvik import normalize
from .icc import (
    DEFAULT_INTENT_RECEIVERS,
    DEFAULT_INTENT_SENDERS,
    invoked_name,
    receiver_entry_method,
    resolve_intent_targets,
)

EXIT = "exit"
FORWARD_TYPES = ("ct", "is", "nb", "ic", "in")
BACKWARD_OF = {"ct": "bct", "is": "bis", "nb": "bnb", "ic": "bic", "in": "bin"}
EDGE_TYPE_ORDER = FORWARD_TYPES + tuple(BACKWARD_OF[t] for t in FORWARD_TYPES)
_TYPE_INDEX = {t: i for i, t in enumerate(EDGE_TYPE_ORDER)}

DEFAULT_LABEL_DIM = 13


class FormatError(ValueError):
    """Corrupt or unrecognized graph file."""


@dataclass
class ChunkNode:
    id: int
    method: str
    offset: int
    opcode_seq: list
    invoke_mtd: str
    end_offset: int = field(default=-1, compare=False)
    send_index: int = field(default=-1, compare=False)  # body index of the terminator


@dataclass(frozen=True, order=True)
class FlowEdge:
    source: int
    target: int
    type: str

    def __post_init__(self):
        if self.type not in _TYPE_INDEX:
            raise FormatError(f"unknown edge type {self.type!r}")


@dataclass
class AbstractFlowGraph:
    nodes: list
    edges: list
    label_dim: int = DEFAULT_LABEL_DIM

    @property
    def node_labels(self) -> np.ndarray:
        return np.array([node_label(n, self.label_dim) for n in self.nodes])

    def edge_onehot(self) -> np.ndarray:
        onehot = np.zeros((len(self.edges), len(EDGE_TYPE_ORDER)))
        for i, e in enumerate(self.edges):
            onehot[i, _TYPE_INDEX[e.type]] = 1.0
        return onehot


def sort_edges(edges):
    return sorted(set(edges), key=lambda e: (_TYPE_INDEX[e.type], e.source, e.target))


def chunk_methods(app, intent_senders=DEFAULT_INTENT_SENDERS):
    """Partition every method body into chunk nodes, ids in (method, offset) order.

    A chunk closes at a call to a user-defined method, at an intent-sending
    call, or at the method exit; the terminating invoke belongs to its chunk.
    """
    chunks = []
    methods = sorted(
        (m for c in app.classes.values() for m in c.methods), key=lambda m: m.method_id
    )
    next_id = 0
    for method in methods:
        current = []
        start = 0
        for idx, ins in enumerate(method.body):
            current.append(ins)
            boundary = ins.invoked_method is not None and (
                app.is_user_defined(ins.invoked_method.partition("->")[0])
                or invoked_name(ins.invoked_method) in intent_senders
            )
            if boundary:
                chunks.append(
                    ChunkNode(
                        id=next_id,
                        method=method.method_id,
                        offset=method.body[start].offset,
                        opcode_seq=[i.opcode.code for i in current],
                        invoke_mtd=ins.invoked_method,
                        end_offset=ins.offset,
                        send_index=idx,
                    )
                )
                next_id += 1
                current = []
                start = idx + 1
        if current:
            chunks.append(
                ChunkNode(
                    id=next_id,
                    method=method.method_id,
                    offset=method.body[start].offset,
                    opcode_seq=[i.opcode.code for i in current],
                    invoke_mtd=EXIT,
                    end_offset=current[-1].offset,
                )
            )
            next_id += 1
    return chunks


def node_label(node: ChunkNode, label_dim: int = DEFAULT_LABEL_DIM) -> np.ndarray:
    """First label_dim opcodes of the chunk, normalized, zero-padded."""
    if label_dim < 1:
        raise ValueError("label_dim must be >= 1")
    vec = np.zeros(label_dim)
    for i, code in enumerate(node.opcode_seq[:label_dim]):
        vec[i] = normalize(code)
    return vec


def _is_intent_chunk(chunk, intent_senders):
    return chunk.invoke_mtd != EXIT and invoked_name(chunk.invoke_mtd) in intent_senders


def build_edges(
    chunks,
    cg,
    traces,
    components,
    intent_senders=DEFAULT_INTENT_SENDERS,
    intent_receivers=DEFAULT_INTENT_RECEIVERS,
):
    """Construct all typed edges over the chunk nodes (forward plus mirrors)."""
    app = cg.app
    by_method = {}
    for c in chunks:
        by_method.setdefault(c.method, []).append(c)
    first_chunk = {m: cs[0] for m, cs in by_method.items()}

    def chunk_at(method_id, offset):
        for c in by_method.get(method_id, ()):
            if c.offset <= offset <= c.end_offset:
                return c
        return None

    diagnostics = []
    ct, is_, ic, in_ = set(), set(), set(), set()

    for trace in traces:
        src = first_chunk.get(trace.methods[0])
        tgt = chunk_at(trace.methods[-1], trace.site_offset)
        if src is None or tgt is None:
            diagnostics.append(f"trace without chunks: {trace.methods}")
            continue
        ct.add((src.id, tgt.id))

    intent_chunks = [c for c in chunks if _is_intent_chunk(c, intent_senders)]

    for entry in cg.entry_points:
        src = first_chunk.get(entry)
        if src is None:
            continue
        reachable = {entry}
        queue = [entry]
        while queue:
            for callee in cg.edges.get(queue.pop(0), ()):
                if callee not in reachable:
                    reachable.add(callee)
                    queue.append(callee)
        for c in intent_chunks:
            if c.method in reachable and c.id != src.id:
                is_.add((src.id, c.id))

    comp_by_class = {c.path_name: c for c in components}
    for c in intent_chunks:
        method = app.get_method(c.method)
        resolution = resolve_intent_targets(app, method, c.send_index, intent_senders)
        if not resolution.components:
            diagnostics.append(f"unresolved intent at chunk {c.id}")
        for comp in resolution.components:
            recv = receiver_entry_method(app, comp)
            tgt = first_chunk.get(recv.method_id) if recv is not None else None
            if tgt is None:
                diagnostics.append(f"no receiver chunk for {comp.path_name}")
                continue
            ic.add((c.id, tgt.id))
        owner = c.method.partition("->")[0]
        if owner in comp_by_class:
            for rname in intent_receivers:
                recv = app.lookup_method(owner, rname)
                if recv is None:
                    continue
                tgt = first_chunk.get(recv.method_id)
                if tgt is None:
                    continue
                ic.add((c.id, tgt.id))
                in_.add((c.id, tgt.id))

    issuing = {chunks_by_id(chunks)[s].method for s, _ in ct | is_ | ic}
    nb = set()
    for method_id in sorted(issuing):
        cs = by_method.get(method_id, ())
        for a, b in zip(cs, cs[1:]):
            if a.invoke_mtd != EXIT:
                nb.add((a.id, b.id))
    touched = {x for pair in ct | is_ | ic | in_ for x in pair}
    nb = {(s, t) for s, t in nb if s in touched or t in touched}

    edges = []
    for tag, pairs in (("ct", ct), ("is", is_), ("nb", nb), ("ic", ic), ("in", in_)):
        for s, t in pairs:
            edges.append(FlowEdge(s, t, tag))
            edges.append(FlowEdge(t, s, BACKWARD_OF[tag]))
    return sort_edges(edges), diagnostics


def chunks_by_id(chunks):
    return {c.id: c for c in chunks}


def build_flow_graph(
    app,
    cg,
    traces,
    label_dim: int = DEFAULT_LABEL_DIM,
    intent_senders=DEFAULT_INTENT_SENDERS,
    intent_receivers=DEFAULT_INTENT_RECEIVERS,
):
    chunks = chunk_methods(app, intent_senders)
    edges, diagnostics = build_edges(
        chunks, cg, traces, app.components, intent_senders, intent_receivers
    )
    graph = AbstractFlowGraph(chunks, edges, label_dim)
    return graph, diagnostics


# --- persistence -------------------------------------------------------------

def serialize_graph(graph: AbstractFlowGraph, out_dir):
    """Write nodes.csv and edges.csv under out_dir, byte-deterministically."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    node_lines = []
    for n in sorted(graph.nodes, key=lambda n: n.id):
        seq = "|".join(str(c) for c in n.opcode_seq)
        node_lines.append(f"{n.id},{n.offset},{seq},{n.invoke_mtd}")
    (out_dir / "nodes.csv").write_text("".join(line + "\n" for line in node_lines))
    edge_lines = [f"{e.source},{e.target},{e.type}" for e in sort_edges(graph.edges)]
    (out_dir / "edges.csv").write_text("".join(line + "\n" for line in edge_lines))
    return out_dir / "nodes.csv", out_dir / "edges.csv"


def deserialize_graph(in_dir, label_dim: int = DEFAULT_LABEL_DIM) -> AbstractFlowGraph:
    """Read a graph written by serialize_graph. Method identities are not part
    of the on-disk format; deserialized chunks carry an empty method field."""
    in_dir = Path(in_dir)
    nodes = []
    ids = set()
    for lineno, line in enumerate(_read_lines(in_dir / "nodes.csv"), start=1):
        parts = line.split(",", 3)
        if len(parts) != 4:
            raise FormatError(f"nodes.csv line {lineno}: expected 4 fields")
        try:
            nid, offset = int(parts[0]), int(parts[1])
            seq = [int(x) for x in parts[2].split("|")] if parts[2] else []
        except ValueError as exc:
            raise FormatError(f"nodes.csv line {lineno}: {exc}") from exc
        nodes.append(ChunkNode(nid, "", offset, seq, parts[3]))
        ids.add(nid)
    edges = []
    for lineno, line in enumerate(_read_lines(in_dir / "edges.csv"), start=1):
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(f"edges.csv line {lineno}: expected 3 fields")
        try:
            s, t = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise FormatError(f"edges.csv line {lineno}: {exc}") from exc
        if parts[2] not in _TYPE_INDEX:
            raise FormatError(f"edges.csv line {lineno}: unknown edge type {parts[2]!r}")
        if s not in ids or t not in ids:
            raise FormatError(f"edges.csv line {lineno}: dangling endpoint")
        edges.append(FlowEdge(s, t, parts[2]))
    nodes.sort(key=lambda n: n.id)
    return AbstractFlowGraph(nodes, sort_edges(edges), label_dim)


def _read_lines(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return [line for line in text.splitlines() if line]


def structurally_equal(a: AbstractFlowGraph, b: AbstractFlowGraph) -> bool:
    """Equality over the persisted fields (quadruples, triples, label size)."""
    qa = [(n.id, n.offset, tuple(n.opcode_seq), n.invoke_mtd) for n in a.nodes]
    qb = [(n.id, n.offset, tuple(n.opcode_seq), n.invoke_mtd) for n in b.nodes]
    return qa == qb and sort_edges(a.edges) == sort_edges(b.edges) and a.label_dim == b.label_dim
