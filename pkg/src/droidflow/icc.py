"""Intent target resolution for inter-component communication edges.

Deliberately lightweight: explicit targets come from a backward scan for
class/name constants inside the sending code chunk, implicit targets from
matching string constants against manifest intent-filter actions. Apps whose
intents defeat this (computed targets, cross-method constants) degrade to
diagnostics instead of edges.
"""

import re
from dataclasses import dataclass

DEFAULT_INTENT_SENDERS = frozenset(
    {
        "startActivity",
        "startActivityForResult",
        "startService",
        "bindService",
        "sendBroadcast",
        "sendOrderedBroadcast",
    }
)

# Methods through which a started child component hands data back to its
# parent; used for the returning-ICC / implicit-neighbor pattern.
DEFAULT_INTENT_RECEIVERS = ("onActivityResult", "onNewIntent")

_STRING_RE = re.compile(r'"([^"]*)"')
_CLASS_RE = re.compile(r"^(L[^\s;]+;)$")


def invoked_name(signature: str) -> str:
    return signature.partition("->")[2].partition("(")[0]


def is_intent_send(instruction, senders=DEFAULT_INTENT_SENDERS) -> bool:
    return (
        instruction.invoked_method is not None
        and invoked_name(instruction.invoked_method) in senders
    )


def _dotted_to_class(dotted: str) -> str:
    return "L" + dotted.replace(".", "/") + ";"


@dataclass(frozen=True)
class IccResolution:
    components: tuple       # resolved target components, sorted by path name
    explicit: bool          # class-constant match (vs intent-filter action match)


def resolve_intent_targets(app, method, send_index, senders=DEFAULT_INTENT_SENDERS):
    """Resolve the components addressed by the intent-sending invoke at send_index.

    The backward constant scan stops at the previous chunk boundary (a
    user-defined or intent-sending call site), mirroring how chunk nodes are
    carved out of a method. Explicit class references win over action-string
    matches. Returns an IccResolution (components possibly empty).
    """
    body = method.body
    start = 0
    for i in range(send_index - 1, -1, -1):
        ins = body[i]
        if ins.invoked_method is not None and (
            app.is_user_defined(ins.invoked_method.partition("->")[0])
            or invoked_name(ins.invoked_method) in senders
        ):
            start = i + 1
            break

    by_name = {c.path_name: c for c in app.components}
    explicit = []
    action_strings = []
    for ins in body[start : send_index + 1]:
        for op in ins.operands:
            m = _CLASS_RE.match(op)
            if m and m.group(1) in by_name:
                explicit.append(by_name[m.group(1)])
            for s in _STRING_RE.findall(op):
                if _dotted_to_class(s) in by_name:
                    explicit.append(by_name[_dotted_to_class(s)])
                else:
                    action_strings.append(s)
    if explicit:
        uniq = {c.path_name: c for c in explicit}
        return IccResolution(tuple(sorted(uniq.values(), key=lambda c: c.path_name)), True)

    implicit = {
        c.path_name: c
        for c in app.components
        for s in action_strings
        if c.declares_action(s)
    }
    return IccResolution(tuple(sorted(implicit.values(), key=lambda c: c.path_name)), False)


def receiver_entry_method(app, component):
    """The method an incoming intent lands in: onReceive for receivers,
    onCreate for everything else (inherited user-defined definitions count)."""
    name = "onReceive" if component.category == "receiver" else "onCreate"
    return app.lookup_method(component.path_name, name)
