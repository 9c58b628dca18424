"""Entity-kind taxonomy, loaded from the shared taxonomy configuration file.

The configuration is a JSON document (see ``data/taxonomy.json``)::

    {
      "format": "repair-miner-taxonomy", "version": 1,
      "entity_kinds": [...],          # ordered, unique
      "statement_kinds": [...],       # subset of entity_kinds
      "root_kinds": [...],            # allowed tree roots
      "structure_kinds": [...],       # class/method-level containers
      "mapping": {"IfStatement": "if_statement", ...},
      "change_types": [{"name": ..., "entities": [...]}, ...],
      "ctet_combinations": [[change_type, entity_kind], ...],
      "rules": {"inserted_member_body": "drop" | "count"}
    }

The last three keys belong to the change taxonomy (``repair_miner.changes``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

from repair_miner.errors import TaxonomyError


def display(label: str) -> str:
    """``if_statement`` -> ``if statement``."""
    return label.replace("_", " ")


@dataclass(frozen=True)
class EntityTaxonomy:
    kinds: tuple[str, ...]
    statement_kinds: frozenset[str]
    mapping: Mapping[str, str]
    root_kinds: tuple[str, ...] = ("compilation_unit",)
    structure_kinds: frozenset[str] = frozenset({"class", "method"})

    def __post_init__(self):
        if len(set(self.kinds)) != len(self.kinds):
            raise TaxonomyError("entity kind labels must be unique")
        known = set(self.kinds)
        for group, name in ((self.statement_kinds, "statement_kinds"), (self.root_kinds, "root_kinds"),
                            (self.structure_kinds, "structure_kinds"), (self.mapping.values(), "mapping")):
            missing = sorted(set(group) - known)
            if missing:
                raise TaxonomyError(f"{name} references unknown kinds: {', '.join(missing)}", kind=missing[0])

    def __contains__(self, kind: str) -> bool:
        return kind in self._known

    @property
    def _known(self) -> frozenset[str]:
        return frozenset(self.kinds)

    def resolve(self, name: str) -> str:
        """Map a parser node name or a kind label to a kind label."""
        if name in self._known:
            return name
        try:
            return self.mapping[name]
        except KeyError:
            raise TaxonomyError(f"unknown entity kind {name!r}", kind=name) from None

    def is_statement(self, kind: str) -> bool:
        return kind in self.statement_kinds

    @classmethod
    def from_config(cls, doc: dict) -> "EntityTaxonomy":
        return cls(
            kinds=tuple(doc["entity_kinds"]),
            statement_kinds=frozenset(doc.get("statement_kinds", ())),
            mapping=dict(doc.get("mapping", {})),
            root_kinds=tuple(doc.get("root_kinds", ("compilation_unit",))),
            structure_kinds=frozenset(doc.get("structure_kinds", ("class", "method"))),
        )

    @classmethod
    def load(cls, path: Optional[str | Path] = None) -> "EntityTaxonomy":
        return cls.from_config(load_config(path))


def load_config(path: Optional[str | Path] = None) -> dict:
    if path is None:
        return dict(_default_config())
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise TaxonomyError(f"cannot read taxonomy file {path}: {exc}") from exc
    if doc.get("format") != "repair-miner-taxonomy":
        raise TaxonomyError(f"{path} is not a taxonomy file")
    return doc


@lru_cache(maxsize=None)
def _default_config_text() -> str:
    return resources.files("repair_miner.data").joinpath("taxonomy.json").read_text(encoding="utf-8")


def _default_config() -> dict:
    return json.loads(_default_config_text())


@lru_cache(maxsize=None)
def default_taxonomy() -> EntityTaxonomy:
    return EntityTaxonomy.from_config(_default_config())
