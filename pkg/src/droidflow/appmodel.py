"""In-memory model of a disassembled app: classes, methods, components.

Built either from smali class files plus a decoded manifest, or from the
JSON fixture format (same fields, no smali text involved).
"""

import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from .dalvik import Opcode, opcode_from_mnemonic

COMPONENT_CATEGORIES = ("activity", "service", "receiver", "provider")


class EmptyAppError(ValueError):
    """No class of the app could be parsed."""


@dataclass(frozen=True)
class Instruction:
    offset: int
    opcode: Opcode
    operands: tuple
    invoked_method: str | None = None

    @property
    def is_invoke(self) -> bool:
        return self.opcode.is_invoke


@dataclass
class MethodDef:
    owner: str
    name: str
    descriptor: str
    flags: frozenset
    body: list
    is_user_defined: bool = True

    @property
    def method_id(self) -> str:
        return f"{self.owner}->{self.name}{self.descriptor}"


@dataclass
class ClassDef:
    name: str
    superclass: str
    interfaces: tuple
    methods: list

    def find_method(self, name: str, descriptor: str | None = None):
        for m in self.methods:
            if m.name == name and (descriptor is None or m.descriptor == descriptor):
                return m
        return None


@dataclass(frozen=True)
class IntentFilter:
    actions: frozenset
    categories: frozenset


@dataclass
class Component:
    path_name: str
    category: str
    intent_filters: list
    exported: bool = False

    def __post_init__(self):
        if self.category not in COMPONENT_CATEGORIES:
            raise ValueError(f"bad component category: {self.category!r}")

    def declares_action(self, action: str) -> bool:
        return any(action in f.actions for f in self.intent_filters)


@dataclass
class AppModel:
    app_id: str
    classes: dict
    components: list
    metadata: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def is_user_defined(self, class_name: str) -> bool:
        return class_name in self.classes

    def lookup_method(self, owner: str, name: str, descriptor: str | None = None):
        """Find the defining MethodDef, walking up user-defined superclasses."""
        cls = self.classes.get(owner)
        seen = set()
        while cls is not None and cls.name not in seen:
            seen.add(cls.name)
            m = cls.find_method(name, descriptor)
            if m is not None:
                return m
            cls = self.classes.get(cls.superclass)
        return None

    def methods(self):
        """All user-defined methods in deterministic (class, definition) order."""
        for name in sorted(self.classes):
            yield from self.classes[name].methods

    def get_method(self, method_id: str):
        owner, _, rest = method_id.partition("->")
        name, _, descriptor = rest.partition("(")
        return self.lookup_method(owner, name, "(" + descriptor)


def split_signature(signature: str):
    """Split 'Lpkg/Cls;->name(args)ret' into (owner, name, descriptor)."""
    owner, _, rest = signature.partition("->")
    name, _, descriptor = rest.partition("(")
    return owner, name, "(" + descriptor


def assign_offsets(instructions):
    """Re-offset a sequence of (opcode, operands, invoked) by code-unit width."""
    out = []
    offset = 0
    for opcode, operands, invoked in instructions:
        out.append(Instruction(offset, opcode, tuple(operands), invoked))
        offset += opcode.width
    return out


# JSON fixture format: a dict mirroring AppModel field-for-field. Offsets are
# recomputed from instruction widths, so fixtures only list mnemonics.

def app_from_ir(data: dict) -> AppModel:
    classes = {}
    for cd in data.get("classes", []):
        methods = []
        for md in cd.get("methods", []):
            raw = []
            for ins in md.get("body", []):
                opcode = opcode_from_mnemonic(ins["mnemonic"])
                invoked = ins.get("invoked_method")
                if opcode.is_invoke and invoked is None:
                    raise ValueError(
                        f"invoke without invoked_method in {cd['name']}.{md['name']}"
                    )
                raw.append((opcode, tuple(ins.get("operands", ())), invoked))
            methods.append(
                MethodDef(
                    owner=cd["name"],
                    name=md["name"],
                    descriptor=md["descriptor"],
                    flags=frozenset(md.get("flags", ())),
                    body=assign_offsets(raw),
                    is_user_defined=md.get("is_user_defined", True),
                )
            )
        seen = set()
        for m in methods:
            key = (m.name, m.descriptor)
            if key in seen:
                raise ValueError(f"duplicate method {m.name}{m.descriptor} in {cd['name']}")
            seen.add(key)
        classes[cd["name"]] = ClassDef(
            name=cd["name"],
            superclass=cd.get("superclass", "Ljava/lang/Object;"),
            interfaces=tuple(cd.get("interfaces", ())),
            methods=methods,
        )
    components = [
        Component(
            path_name=c["path_name"],
            category=c["category"],
            intent_filters=[
                IntentFilter(frozenset(f.get("actions", ())), frozenset(f.get("categories", ())))
                for f in c.get("intent_filters", ())
            ],
            exported=c.get("exported", False),
        )
        for c in data.get("components", [])
    ]
    app = AppModel(
        app_id=data.get("app_id", "app"),
        classes=classes,
        components=components,
        metadata=dict(data.get("metadata", {})),
    )
    _check_links(app)
    return app


def _check_links(app: AppModel):
    """Record a diagnostic for every unresolvable user-defined call target."""
    for method in app.methods():
        for ins in method.body:
            if ins.invoked_method is None:
                continue
            owner, name, descriptor = split_signature(ins.invoked_method)
            if app.is_user_defined(owner) and app.lookup_method(owner, name, descriptor) is None:
                app.diagnostics.append(
                    f"unresolved call {ins.invoked_method} from {method.method_id}"
                )
    for comp in app.components:
        if not app.is_user_defined(comp.path_name):
            app.diagnostics.append(f"declared-missing component class {comp.path_name}")


def load_app(root) -> AppModel:
    """Load an app from a directory (or zip of one).

    Expected layout: AndroidManifest.xml plus smali/**/*.smali, or an ir.json
    fixture. Optional meta.json supplies {"timestamp": ..., "label": ...}.
    Individual class parse failures become diagnostics; only a fully
    class-less app is fatal.
    """
    from .manifest import parse_manifest
    from .smali import SmaliSyntaxError, parse_smali_class

    root = Path(root)
    if root.is_file() and root.suffix == ".zip":
        return _load_zip(root)

    ir_path = root / "ir.json"
    if ir_path.exists():
        app = app_from_ir(json.loads(ir_path.read_text()))
        app.app_id = root.name
    else:
        components = []
        manifest_path = root / "AndroidManifest.xml"
        if manifest_path.exists():
            components = parse_manifest(manifest_path.read_bytes())
        classes = {}
        diagnostics = []
        from .dalvik import UnknownOpcodeError

        for path in sorted((root / "smali").rglob("*.smali")):
            try:
                cd = parse_smali_class(path.read_text())
                classes[cd.name] = cd
            except (SmaliSyntaxError, UnknownOpcodeError) as exc:
                diagnostics.append(f"{path.relative_to(root)}: {exc}")
        if not classes:
            raise EmptyAppError(f"no class parsed under {root}")
        app = AppModel(root.name, classes, components, diagnostics=diagnostics)
        _check_links(app)

    meta_path = root / "meta.json"
    if meta_path.exists():
        app.metadata.update(json.loads(meta_path.read_text()))
    return app


def _load_zip(path: Path) -> AppModel:
    import tempfile

    with zipfile.ZipFile(path) as zf, tempfile.TemporaryDirectory() as tmp:
        zf.extractall(tmp)
        entries = list(Path(tmp).iterdir())
        root = entries[0] if len(entries) == 1 and entries[0].is_dir() else Path(tmp)
        app = load_app(root)
        app.app_id = path.stem
        return app
