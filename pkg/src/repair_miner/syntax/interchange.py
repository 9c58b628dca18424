"""Tree interchange format.

One UTF-8 JSON document per tree::

    {
      "format": "repair-miner-tree",
      "version": 1,
      "origin": {"path": "src/Foo.java", "revision": "1.2"},
      "root": {"kind": "compilation_unit", "value": null,
               "range": [1, 1, 9, 2], "children": [...]}
    }

``kind`` may be either a taxonomy label or a parser node name listed in the
taxonomy mapping; names are resolved to labels on parse, so serialization
always emits labels.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from repair_miner.errors import ParseError
from repair_miner.syntax.taxonomy import EntityTaxonomy, default_taxonomy
from repair_miner.syntax.tree import SourceTree, TreeNode, validate

FORMAT = "repair-miner-tree"
VERSION = 1


def _node_from_record(rec: Any, taxonomy: EntityTaxonomy, where: str) -> TreeNode:
    if not isinstance(rec, dict):
        raise ParseError(f"{where}: expected an object")
    unknown = set(rec) - {"kind", "value", "range", "children"}
    if unknown:
        raise ParseError(f"{where}: unexpected fields {sorted(unknown)}")
    kind = rec.get("kind")
    if not isinstance(kind, str):
        raise ParseError(f"{where}.kind: expected a string")
    value = rec.get("value")
    if value is not None and not isinstance(value, str):
        raise ParseError(f"{where}.value: expected a string or null")
    rng = rec.get("range")
    if not (isinstance(rng, list) and len(rng) == 4 and all(type(x) is int for x in rng)):
        raise ParseError(f"{where}.range: expected four integers")
    children = rec.get("children", [])
    if not isinstance(children, list):
        raise ParseError(f"{where}.children: expected an array")
    return TreeNode(
        kind=taxonomy.resolve(kind),
        value=value,
        range=tuple(rng),
        children=tuple(
            _node_from_record(c, taxonomy, f"{where}.children[{i}]") for i, c in enumerate(children)
        ),
    )


def tree_from_record(doc: Any, taxonomy: Optional[EntityTaxonomy] = None) -> SourceTree:
    """Build a validated tree from an already-decoded interchange document."""
    taxonomy = taxonomy or default_taxonomy()
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ParseError(f"not a {FORMAT} document")
    if doc.get("version") != VERSION:
        raise ParseError(f"unsupported interchange version {doc.get('version')!r}")
    origin = doc.get("origin") or {}
    root = _node_from_record(doc.get("root"), taxonomy, "root")
    tree = SourceTree(root, str(origin.get("path", "")), str(origin.get("revision", "")))
    return validate(tree, taxonomy)


def parse_interchange(text: str, taxonomy: Optional[EntityTaxonomy] = None) -> SourceTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed interchange document: {exc.msg}", exc.lineno, exc.colno) from exc
    return tree_from_record(doc, taxonomy)


def _node_record(node: TreeNode) -> dict:
    return {
        "kind": node.kind,
        "value": node.value,
        "range": list(node.range),
        "children": [_node_record(c) for c in node.children],
    }


def tree_to_record(tree: SourceTree) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "origin": {"path": tree.path, "revision": tree.revision},
        "root": _node_record(tree.root),
    }


def serialize_interchange(tree: SourceTree) -> str:
    return json.dumps(tree_to_record(tree), indent=1, ensure_ascii=False) + "\n"
