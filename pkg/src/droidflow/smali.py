"""Parser for the structural subset of smali class files.

Recognized directives: .class/.super/.implements/.method/.end method.
Debug and metadata directives (.line, .locals, annotations, switch payloads,
...) are skipped; anything else starting with a dot is a syntax error. Only
opcodes, call targets and class structure survive into the model, which is
all the downstream analyses consume.
"""

import re

from .appmodel import ClassDef, MethodDef, assign_offsets
from .dalvik import opcode_from_mnemonic

_CLASS_RE = re.compile(r"^\.class(?:\s+([\w $-]+?))?\s+(L[^\s;]+;)$")
_SUPER_RE = re.compile(r"^\.super\s+(L[^\s;]+;)$")
_IMPLEMENTS_RE = re.compile(r"^\.implements\s+(L[^\s;]+;)$")
_METHOD_RE = re.compile(r"^\.method(?:\s+([\w $-]+?))?\s+([^\s(]+)(\(.*\)\S+)$")
_INVOKE_TARGET_RE = re.compile(r"(L[^\s;]+;|\[[^\s]+)->([^\s(]+)(\(.*\)\S+)$")

# One-line directives carrying no structure we need.
_SKIP_PREFIXES = (
    ".line", ".locals", ".local", ".registers", ".param", ".prologue",
    ".source", ".field", ".restart", ".end local", ".end param",
    ".catch", ".catchall", ".enum",
)
# Block directives skipped wholesale up to their ".end <name>".
_SKIP_BLOCKS = {
    ".annotation": ".end annotation",
    ".packed-switch": ".end packed-switch",
    ".sparse-switch": ".end sparse-switch",
    ".array-data": ".end array-data",
    ".subannotation": ".end subannotation",
}


class SmaliSyntaxError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _split_operands(text: str):
    """Split an operand string on top-level commas, keeping {...} groups whole."""
    parts = []
    depth = 0
    current = []
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    tail = "".join(current).strip()
    if tail:
        parts.append(tail)
    return tuple(parts)


def parse_smali_class(text: str) -> ClassDef:
    """Parse one smali class file into a ClassDef.

    Raises SmaliSyntaxError (with line number) on malformed directives and
    UnknownOpcodeError on mnemonics outside the Dalvik table.
    """
    name = None
    superclass = "Ljava/lang/Object;"
    interfaces = []
    methods = []
    method_head = None   # (flags, name, descriptor)
    raw_body = None      # (opcode, operands, invoked) triples
    skip_until = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if skip_until is not None:
            if line.startswith(skip_until):
                skip_until = None
            continue
        if line.startswith(":"):
            continue

        if line.startswith("."):
            for block, end in _SKIP_BLOCKS.items():
                if line.startswith(block):
                    skip_until = end
                    break
            if skip_until is not None:
                continue
            if line.startswith(_SKIP_PREFIXES):
                continue
            if line.startswith(".class"):
                m = _CLASS_RE.match(line)
                if not m:
                    raise SmaliSyntaxError(f"malformed .class: {line}", lineno)
                name = m.group(2)
            elif line.startswith(".super"):
                m = _SUPER_RE.match(line)
                if not m:
                    raise SmaliSyntaxError(f"malformed .super: {line}", lineno)
                superclass = m.group(1)
            elif line.startswith(".implements"):
                m = _IMPLEMENTS_RE.match(line)
                if not m:
                    raise SmaliSyntaxError(f"malformed .implements: {line}", lineno)
                interfaces.append(m.group(1))
            elif line == ".end method":
                if method_head is None:
                    raise SmaliSyntaxError(".end method outside a method", lineno)
                flags, mname, descriptor = method_head
                methods.append((flags, mname, descriptor, raw_body))
                method_head = None
                raw_body = None
            elif line.startswith(".method"):
                if method_head is not None:
                    raise SmaliSyntaxError("nested .method", lineno)
                m = _METHOD_RE.match(line)
                if not m:
                    raise SmaliSyntaxError(f"malformed .method: {line}", lineno)
                flags = frozenset((m.group(1) or "").split())
                method_head = (flags, m.group(2), m.group(3))
                raw_body = []
            else:
                raise SmaliSyntaxError(f"unsupported directive: {line}", lineno)
            continue

        # Instruction line.
        if method_head is None:
            raise SmaliSyntaxError(f"instruction outside a method: {line}", lineno)
        mnemonic, _, operand_text = line.partition(" ")
        opcode = opcode_from_mnemonic(mnemonic)
        operands = _split_operands(operand_text)
        invoked = None
        if opcode.is_invoke:
            m = _INVOKE_TARGET_RE.search(operands[-1] if operands else "")
            if not m:
                raise SmaliSyntaxError(f"invoke without a method reference: {line}", lineno)
            invoked = operands[-1]
        raw_body.append((opcode, operands, invoked))

    if name is None:
        raise SmaliSyntaxError("missing .class directive", 1)
    if method_head is not None:
        raise SmaliSyntaxError("unterminated .method", len(text.splitlines()))

    abstract_flags = {"abstract", "native"}
    method_defs = []
    for flags, mname, descriptor, body in methods:
        if flags & abstract_flags:
            body = []
        method_defs.append(
            MethodDef(
                owner=name,
                name=mname,
                descriptor=descriptor,
                flags=flags,
                body=assign_offsets(body),
            )
        )
    seen = set()
    for m in method_defs:
        key = (m.name, m.descriptor)
        if key in seen:
            raise SmaliSyntaxError(f"duplicate method {m.name}{m.descriptor}", 1)
        seen.add(key)
    return ClassDef(name=name, superclass=superclass, interfaces=tuple(interfaces), methods=method_defs)


def format_class(cd: ClassDef) -> str:
    """Pretty-print a ClassDef back into parseable smali text."""
    lines = [f".class {cd.name}", f".super {cd.superclass}"]
    for iface in cd.interfaces:
        lines.append(f".implements {iface}")
    for method in cd.methods:
        flags = " ".join(sorted(method.flags))
        head = f".method {flags} {method.name}{method.descriptor}" if flags else f".method {method.name}{method.descriptor}"
        lines.append("")
        lines.append(head)
        for ins in method.body:
            if ins.operands:
                lines.append(f"    {ins.opcode.mnemonic} {', '.join(ins.operands)}")
            else:
                lines.append(f"    {ins.opcode.mnemonic}")
        lines.append(".end method")
    return "\n".join(lines) + "\n"
