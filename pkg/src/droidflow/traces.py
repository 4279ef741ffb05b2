"""Call traces from entry points to critical-API call sites, and their
opcode sequences.

A trace is a simple path of user-defined methods whose last element contains
an invoke of a critical API. Its opcode sequence chains the prefix of each
method up to the call that continues the trace, descending into the callee,
and stops at (and includes) the critical invoke. The per-app sequence budget
is enforced by backward truncation so the trailing critical call always
survives, and sequences are split backward-aligned into fixed-length rows,
dropping the short leading remainder.
"""

from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_MAX_DEPTH = 64
DEFAULT_MAX_TRACES_PER_ENTRY = 256
DEFAULT_OPCODE_BUDGET = 8000


class BrokenTraceError(ValueError):
    """Trace walk could not find the invoke continuing the path."""


class EmptyMatrixError(ValueError):
    """No trace produced a full row; callers substitute a zero-row matrix."""


@dataclass
class CallTrace:
    methods: tuple            # method ids, entry first, call-site method last
    critical_api: str
    site_offset: int          # offset of the critical invoke in methods[-1]
    hop_offsets: tuple = ()   # offset of the invoke continuing the trace, per hop
    opcode_seq: list = field(default_factory=list)

    @property
    def entry(self):
        return self.methods[0]


@dataclass
class SequenceMatrix:
    rows: np.ndarray          # (n, row_len) integer opcode values
    row_len: int

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @classmethod
    def empty(cls, row_len: int) -> "SequenceMatrix":
        return cls(np.zeros((0, row_len), dtype=np.int64), row_len)

    def save_csv(self, path):
        lines = [f"{self.n},{self.row_len}"]
        for row in self.rows:
            lines.append(",".join(str(int(v)) for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load_csv(cls, path) -> "SequenceMatrix":
        with open(path) as fh:
            header = fh.readline().strip()
            n, row_len = (int(x) for x in header.split(","))
            rows = np.zeros((n, row_len), dtype=np.int64)
            for i in range(n):
                rows[i] = [int(x) for x in fh.readline().strip().split(",")]
        return cls(rows, row_len)


def find_call_traces(
    cg,
    critical,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_traces_per_entry: int = DEFAULT_MAX_TRACES_PER_ENTRY,
):
    """All simple paths from each entry point to a critical-API call site.

    Depth-first in call-site order, so results are deterministic. Depth and
    per-entry trace caps guard against path explosion; hitting one is
    recorded on the call graph diagnostics, not an error.
    """
    critical_set = set(critical)
    app = cg.app
    traces = []

    def critical_sites(method_id):
        method = app.get_method(method_id)
        if method is None:
            return []
        return [
            ins.offset
            for ins in method.body
            if ins.invoked_method in critical_set
        ]

    for entry in cg.entry_points:
        budget = [max_traces_per_entry]

        def dfs(path, hop_offsets):
            if budget[0] <= 0:
                return
            current = path[-1]
            for offset in critical_sites(current):
                if budget[0] <= 0:
                    cg.diagnostics.append(f"trace cap hit at entry {entry}")
                    return
                traces.append(
                    CallTrace(
                        methods=tuple(path),
                        critical_api=_api_at(app, current, offset),
                        site_offset=offset,
                        hop_offsets=tuple(hop_offsets),
                    )
                )
                budget[0] -= 1
            if len(path) >= max_depth:
                cg.diagnostics.append(f"depth cap hit at entry {entry}")
                return
            on_path = set(path)
            for site_offset, targets in cg.call_sites.get(current, ()):
                for callee in targets:
                    if callee in on_path:
                        continue
                    dfs(path + [callee], hop_offsets + [site_offset])

        dfs([entry], [])
    return traces


def _api_at(app, method_id, offset):
    method = app.get_method(method_id)
    for ins in method.body:
        if ins.offset == offset:
            return ins.invoked_method
    raise BrokenTraceError(f"no instruction at {method_id} offset {offset}")


def _continue_offset(app, cg, method_id, next_id):
    """Offset of the first call site in method_id that can reach next_id."""
    if cg is not None:
        for offset, targets in cg.call_sites.get(method_id, ()):
            if next_id in targets:
                return offset
    # fallback for hand-built traces: match the raw signature text
    method = app.get_method(method_id)
    if method is not None:
        for ins in method.body:
            if ins.invoked_method == next_id:
                return ins.offset
    return None


def extract_opcodes(trace: CallTrace, app, cg=None, normalized: bool = False):
    """Accumulate the trace's opcode sequence by prefix-chaining its methods.

    Within each method, every instruction up to the trace-continuing invoke
    contributes its opcode (off-trace calls contribute one opcode and are not
    entered); the walk then descends into the next method. In the final
    method the sequence stops at, and includes, the critical invoke. With
    normalized=True values are scaled to [0, 1] by /255 (graph node labels
    use that form; the sequence rows keep raw integer codes).
    """
    seq = []
    hop_offsets = list(trace.hop_offsets)
    for i, mid in enumerate(trace.methods):
        method = app.get_method(mid)
        if method is None:
            raise BrokenTraceError(f"method {mid} not in app")
        last = i == len(trace.methods) - 1
        if last:
            stop = trace.site_offset
        elif i < len(hop_offsets):
            stop = hop_offsets[i]
        else:
            stop = _continue_offset(app, cg, mid, trace.methods[i + 1])
            if stop is None:
                raise BrokenTraceError(
                    f"no invoke from {mid} to {trace.methods[i + 1]}"
                )
        emitted = False
        for ins in method.body:
            seq.append(ins.opcode.code)
            if ins.offset == stop:
                if not last and not ins.is_invoke:
                    raise BrokenTraceError(
                        f"trace hop at {mid} offset {stop} is not an invoke"
                    )
                emitted = True
                break
        if not emitted:
            raise BrokenTraceError(f"offset {stop} missing in {mid}")
    if normalized:
        return [c / 255.0 for c in seq]
    return seq


def with_opcode_seqs(traces, app, cg=None):
    """Copies of traces with opcode_seq filled in."""
    return [
        replace(t, opcode_seq=extract_opcodes(t, app, cg)) for t in traces
    ]


def sample_opcodes(traces, budget: int = DEFAULT_OPCODE_BUDGET, row_len: int = 100):
    """Truncate trace sequences so the app totals at most `budget` opcodes.

    No-op when the total already fits. Otherwise each trace keeps its last
    floor(budget / y) opcodes, rounded down to a multiple of row_len but
    never below row_len, so truncation cannot strand a trace below one row.
    The tail is kept, so the final opcode stays the critical invoke.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not traces:
        return []
    total = sum(len(t.opcode_seq) for t in traces)
    if total <= budget:
        return list(traces)
    per_trace = budget // len(traces)
    bound = max(row_len, (per_trace // row_len) * row_len)
    out = []
    for t in traces:
        if len(t.opcode_seq) > bound:
            out.append(replace(t, opcode_seq=list(t.opcode_seq[-bound:])))
        else:
            out.append(t)
    return out


def split_sequence(seq, row_len: int, pad_short: bool = False):
    """Backward-aligned fixed-length rows of a sequence.

    The trailing floor(k / row_len) * row_len elements are cut into rows;
    the short leading remainder is dropped. A sequence shorter than one row
    yields nothing unless pad_short left-pads it with zeros (off by default,
    for experimentation only).
    """
    if row_len < 1:
        raise ValueError("row_len must be >= 1")
    k = len(seq)
    q = k // row_len
    if q == 0:
        if pad_short and k > 0:
            return [[0] * (row_len - k) + list(seq)]
        return []
    start = k - q * row_len
    return [list(seq[start + j * row_len : start + (j + 1) * row_len]) for j in range(q)]


def build_matrix(traces, row_len: int, pad_short: bool = False) -> SequenceMatrix:
    """Stack all row splits of all traces, in trace order.

    Raises EmptyMatrixError when nothing reaches one full row; the pipeline
    maps that onto the zero-row matrix so such apps still classify.
    """
    rows = []
    for t in traces:
        rows.extend(split_sequence(t.opcode_seq, row_len, pad_short))
    if not rows:
        raise EmptyMatrixError("no trace produced a full row")
    return SequenceMatrix(np.array(rows, dtype=np.int64), row_len)
