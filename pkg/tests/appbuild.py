"""Small builders for JSON-IR fixture apps used across the test suite."""

from droidflow.appmodel import app_from_ir


def ins(mnemonic, *operands):
    return {"mnemonic": mnemonic, "operands": list(operands)}


def invoke(kind, target, regs="{v0}"):
    return {
        "mnemonic": f"invoke-{kind}",
        "operands": [regs, target],
        "invoked_method": target,
    }


def method(name, descriptor="()V", body=(), flags=("public",)):
    return {
        "name": name,
        "descriptor": descriptor,
        "flags": list(flags),
        "body": list(body),
    }


def cls(name, methods=(), superclass="Ljava/lang/Object;", interfaces=()):
    return {
        "name": name,
        "superclass": superclass,
        "interfaces": list(interfaces),
        "methods": list(methods),
    }


def component(path_name, category="activity", actions=(), exported=False):
    filters = [{"actions": list(actions)}] if actions else []
    return {
        "path_name": path_name,
        "category": category,
        "intent_filters": filters,
        "exported": exported,
    }


def build_app(classes, components=(), app_id="fixture", metadata=None):
    return app_from_ir(
        {
            "app_id": app_id,
            "classes": list(classes),
            "components": list(components),
            "metadata": metadata or {},
        }
    )
