"""Decoded AndroidManifest.xml parsing into component declarations.

Binary AXML input is rejected outright; decode it with an external tool
first (aapt2 dump, apktool) and feed the plain XML here.
"""

import xml.etree.ElementTree as ET

from .appmodel import Component, IntentFilter

_ANDROID_NS = "{http://schemas.android.com/apk/res/android}"
_AXML_MAGIC = b"\x03\x00\x08\x00"
_TAG_CATEGORY = {
    "activity": "activity",
    "service": "service",
    "receiver": "receiver",
    "provider": "provider",
}


class XmlError(ValueError):
    """Malformed manifest XML."""


class AxmlUnsupportedError(ValueError):
    """Binary AXML input; only decoded plain-text manifests are accepted."""


def _class_name(raw: str, package: str) -> str:
    """Normalize a manifest component name to smali class-name form."""
    if raw.startswith("L") and raw.endswith(";"):
        return raw
    if raw.startswith("."):
        dotted = package + raw
    elif "." not in raw and package:
        dotted = f"{package}.{raw}"
    else:
        dotted = raw
    return "L" + dotted.replace(".", "/") + ";"


def parse_manifest(xml) -> list:
    """Parse decoded manifest XML (str or bytes) into Component objects."""
    if isinstance(xml, bytes):
        if xml[:4] == _AXML_MAGIC:
            raise AxmlUnsupportedError(
                "binary AXML manifest; decode it to plain XML before loading"
            )
        text = xml.decode("utf-8", errors="replace")
    else:
        if xml[:4] == _AXML_MAGIC.decode("latin-1"):
            raise AxmlUnsupportedError(
                "binary AXML manifest; decode it to plain XML before loading"
            )
        text = xml

    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise XmlError(f"malformed manifest XML: {exc}") from exc

    package = root.get("package", "")
    components = []
    application = root.find("application")
    if application is None:
        return components
    for elem in application:
        category = _TAG_CATEGORY.get(elem.tag)
        if category is None:
            continue
        raw_name = elem.get(_ANDROID_NS + "name") or elem.get("name")
        if not raw_name:
            continue
        filters = []
        for filt in elem.findall("intent-filter"):
            actions = frozenset(
                a.get(_ANDROID_NS + "name") or a.get("name") or ""
                for a in filt.findall("action")
            ) - {""}
            categories = frozenset(
                c.get(_ANDROID_NS + "name") or c.get("name") or ""
                for c in filt.findall("category")
            ) - {""}
            filters.append(IntentFilter(actions, categories))
        exported_attr = elem.get(_ANDROID_NS + "exported") or elem.get("exported")
        if exported_attr is not None:
            exported = exported_attr.lower() == "true"
        else:
            exported = bool(filters)
        components.append(
            Component(
                path_name=_class_name(raw_name, package),
                category=category,
                intent_filters=filters,
                exported=exported,
            )
        )
    return components
