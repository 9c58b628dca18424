"""Change types, the (change type, entity) classification of edit operations,
and the two feature spaces CT and CTET."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional, Sequence

from repair_miner.differ import EditOperation, Op
from repair_miner.errors import TaxonomyError, UnclassifiableChangeError, UnknownFeatureError
from repair_miner.syntax.taxonomy import EntityTaxonomy, display, load_config

log = logging.getLogger(__name__)

_ACCESS = {"private": 0, "protected": 2, "public": 3}


@dataclass(frozen=True)
class SourceCodeChange:
    ct: str
    et: str
    path: str = ""
    line: int = 0

    def to_record(self) -> dict:
        return {"ct": self.ct, "et": self.et, "path": self.path, "line": self.line}

    @classmethod
    def from_record(cls, rec: dict) -> "SourceCodeChange":
        return cls(rec["ct"], rec["et"], rec.get("path", ""), int(rec.get("line", 0)))


@dataclass(frozen=True)
class ChangeTaxonomy:
    """Closed set of change types plus the valid (ct, et) combinations."""

    entities: EntityTaxonomy
    change_types: tuple[str, ...]
    allowed: dict  # ct -> frozenset of entity kinds (structural validity)
    combinations: tuple[tuple[str, str], ...]
    rules: dict

    def __post_init__(self):
        if len(set(self.change_types)) != len(self.change_types):
            raise TaxonomyError("change type labels must be unique")
        for ct, et in self.combinations:
            if not self.structurally_valid(ct, et):
                raise TaxonomyError(f"combination ({ct}, {et}) is not structurally valid")

    def __len__(self) -> int:
        return len(self.change_types)

    def structurally_valid(self, ct: str, et: str) -> bool:
        return et in self.allowed.get(ct, ())

    @classmethod
    def from_config(cls, doc: dict) -> "ChangeTaxonomy":
        entities = EntityTaxonomy.from_config(doc)
        allowed = {}
        names = []
        for entry in doc["change_types"]:
            kinds = set()
            for et in entry.get("entities", ()):
                if et == "@statement":
                    kinds |= entities.statement_kinds
                elif et not in entities:
                    raise TaxonomyError(f"change type {entry['name']!r} references unknown kind {et!r}", kind=et)
                else:
                    kinds.add(et)
            names.append(entry["name"])
            allowed[entry["name"]] = frozenset(kinds)
        combos = tuple((ct, et) for ct, et in doc.get("ctet_combinations", ()))
        return cls(entities, tuple(names), allowed, combos, dict(doc.get("rules", {})))

    @classmethod
    def load(cls, path: Optional[str | Path] = None) -> "ChangeTaxonomy":
        if path is None:
            return default_change_taxonomy()
        return cls.from_config(load_config(path))


@lru_cache(maxsize=None)
def default_change_taxonomy() -> ChangeTaxonomy:
    return ChangeTaxonomy.from_config(load_config())


def ctet_label(ct: str, et: str) -> str:
    return f"{display(ct)} of {display(et)}"


@dataclass(frozen=True)
class FeatureSpace:
    model: str  # "CT" or "CTET"
    features: tuple[str, ...]
    strict: bool = True
    taxonomy: Optional[ChangeTaxonomy] = None

    _index: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.model not in ("CT", "CTET"):
            raise ValueError(f"unknown change model {self.model!r}")
        object.__setattr__(self, "_index", frozenset(self.features))
        if len(self._index) != len(self.features):
            raise TaxonomyError("feature labels must be unique")

    def __len__(self) -> int:
        return len(self.features)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def project(self, change: SourceCodeChange) -> str:
        return project_to_feature(change, self)


def feature_space(model: str, taxonomy: Optional[ChangeTaxonomy] = None, strict: bool = True) -> FeatureSpace:
    tax = taxonomy or default_change_taxonomy()
    model = model.upper()
    if model == "CT":
        feats = tuple(display(ct) for ct in tax.change_types)
    elif model == "CTET":
        feats = tuple(ctet_label(ct, et) for ct, et in tax.combinations)
    else:
        raise ValueError(f"unknown change model {model!r}")
    return FeatureSpace(model, feats, strict, tax)


def project_to_feature(change: SourceCodeChange, space: FeatureSpace) -> str:
    tax = space.taxonomy or default_change_taxonomy()
    if change.ct not in tax.allowed:
        raise UnknownFeatureError(f"unknown change type {change.ct!r}")
    if space.model == "CT":
        return display(change.ct)
    if not tax.structurally_valid(change.ct, change.et):
        raise UnknownFeatureError(f"({change.ct}, {change.et}) is not a valid combination")
    label = ctet_label(change.ct, change.et)
    if space.strict and label not in space:
        raise UnknownFeatureError(f"{label!r} is not in the CTET feature list")
    return label


# -- classification -----------------------------------------------------------

def _modifier_words(text: Optional[str]) -> set[str]:
    return set((text or "").split())


def _access(words: set[str]) -> int:
    return max((_ACCESS[w] for w in words if w in _ACCESS), default=1)


def _modifier_change(old: set[str], new: set[str], owner: str) -> Optional[str]:
    a, b = _access(old), _access(new)
    if b > a:
        return "increasing_accessibility_change"
    if b < a:
        return "decreasing_accessibility_change"
    final_added = "final" in new and "final" not in old
    final_removed = "final" in old and "final" not in new
    suffix = {"class": "class_derivability", "method": "method_overridability",
              "attribute": "attribute_modifiability"}.get(owner)
    if suffix and final_added:
        return f"adding_{suffix}"
    if suffix and final_removed:
        return f"removing_{suffix}"
    return None


_DECL_RE = re.compile(r"^(?P<type>[\w.$<>\[\], ?]+?)\s+(?P<name>[\w$]+)\s*(?:=.*|\[.*|,.*)?$")


def _split_attribute(text: str) -> Optional[tuple[set[str], str, str]]:
    words = text.split(" ")
    mods = set()
    while words and words[0] in ("public", "protected", "private", "static", "final", "transient", "volatile"):
        mods.add(words.pop(0))
    m = _DECL_RE.match(" ".join(words))
    if m is None:
        return None
    return mods, m.group("type").strip(), m.group("name")


def _classify_attribute_update(old: str, new: str) -> Optional[str]:
    a, b = _split_attribute(old or ""), _split_attribute(new or "")
    if a is None or b is None:
        return None
    if a[2] != b[2]:
        return "attribute_renaming"
    if a[1] != b[1]:
        return "attribute_type_change"
    return _modifier_change(a[0], b[0], "attribute")


def _classify_parameter_update(old: str, new: str) -> str:
    a, b = (old or "").rsplit(" ", 1), (new or "").rsplit(" ", 1)
    if len(a) == 2 and len(b) == 2 and a[0] == b[0]:
        return "parameter_renaming"
    return "parameter_change"


# Drop reasons that mean "no rule applies" (an error in strict mode); all
# other drops are deliberate.
_UNCLASSIFIABLE = ("no rule", "(", "attribute initializer", "modifier change without")


@dataclass(frozen=True)
class DroppedOperation:
    op: EditOperation
    reason: str


class Classifier:
    def __init__(self, taxonomy: Optional[ChangeTaxonomy] = None, strict: bool = False):
        self.tax = taxonomy or default_change_taxonomy()
        self.strict = strict
        self.member_body_rule = self.tax.rules.get("inserted_member_body", "drop")

    def rule(self, op: EditOperation) -> tuple[Optional[str], Optional[str], str]:
        """Return ``(ct, et, reason)``; ``ct`` is None when the operation is dropped."""
        ents = self.tax.entities
        kind, parent = op.kind, op.parent_kind
        structure = ents.structure_kinds
        if op.op in (Op.INSERT, Op.DELETE) and op.within is not None:
            if op.within in structure:
                if self.member_body_rule != "count" or not ents.is_statement(kind):
                    return None, None, f"inside {op.op.value.lower()}ed {op.within}"
            elif not ents.is_statement(kind) and kind != "else_statement":
                return None, None, f"part of {op.op.value.lower()}ed {op.within}"
        if ents.is_statement(kind):
            ct = {
                Op.INSERT: "statement_insert",
                Op.DELETE: "statement_delete",
                Op.UPDATE: "statement_update",
                Op.MOVE_PARENT: "statement_parent_change",
                Op.MOVE_ORDER: "statement_ordering_change",
            }[op.op]
            return ct, kind, ""
        if kind == "condition_expression":
            if op.op is Op.UPDATE:
                return "condition_expression_change", parent, ""
            return None, None, f"{op.op.value} of a condition"
        if kind == "else_statement":
            if op.op is Op.INSERT:
                return "alternative_part_insert", kind, ""
            if op.op is Op.DELETE:
                return "alternative_part_delete", kind, ""
            return None, None, f"{op.op.value} of an else part"
        if kind == "method":
            ct = {Op.INSERT: "additional_functionality", Op.DELETE: "removed_functionality",
                  Op.UPDATE: "method_renaming"}.get(op.op)
            return (ct, kind, "") if ct else (None, None, "member reordering")
        if kind == "class":
            ct = {Op.INSERT: "additional_class", Op.DELETE: "removed_class", Op.UPDATE: "class_renaming"}.get(op.op)
            return (ct, kind, "") if ct else (None, None, "class reordering")
        if kind == "attribute":
            if op.op is Op.INSERT:
                return "additional_object_state", kind, ""
            if op.op is Op.DELETE:
                return "removed_object_state", kind, ""
            if op.op is Op.UPDATE:
                ct = _classify_attribute_update(op.value, op.new_value)
                return (ct, kind, "") if ct else (None, None, "attribute initializer change")
            return None, None, "member reordering"
        if kind == "parameter":
            ct = {Op.INSERT: "parameter_insert", Op.DELETE: "parameter_delete",
                  Op.MOVE_ORDER: "parameter_ordering_change"}.get(op.op)
            if op.op is Op.UPDATE:
                ct = _classify_parameter_update(op.value, op.new_value)
            return (ct, "parameter", "") if ct else (None, None, "parameter moved across methods")
        if kind == "return_type":
            ct = {Op.INSERT: "return_type_insert", Op.DELETE: "return_type_delete",
                  Op.UPDATE: "return_type_change"}.get(op.op)
            return (ct, "method", "") if ct else (None, None, "return type move")
        if kind in ("parent_class", "parent_interface"):
            ct = {Op.INSERT: f"{kind}_insert", Op.DELETE: f"{kind}_delete", Op.UPDATE: f"{kind}_change"}.get(op.op)
            return (ct, "class", "") if ct else (None, None, f"{kind} reordering")
        if kind == "modifiers":
            old = _modifier_words(op.value if op.op is not Op.INSERT else None)
            new = _modifier_words(op.new_value if op.op is Op.UPDATE else op.value if op.op is Op.INSERT else None)
            ct = _modifier_change(old, new, parent)
            return (ct, parent, "") if ct else (None, None, "modifier change without accessibility or final")
        return None, None, f"no rule for {op.op.value} of {kind}"

    def classify(self, ops: Iterable[EditOperation], path: str = "") -> tuple[list[SourceCodeChange], list[DroppedOperation]]:
        changes, dropped = [], []
        for op in ops:
            ct, et, reason = self.rule(op)
            if ct is not None and not self.tax.structurally_valid(ct, et):
                ct, reason = None, f"({ct}, {et}) is not a valid combination"
            if ct is None:
                if self.strict and reason.startswith(_UNCLASSIFIABLE):
                    raise UnclassifiableChangeError(f"cannot classify {op.op.value} of {op.kind}: {reason}")
                log.debug("dropped %s of %s in %s: %s", op.op.value, op.kind, path or "<memory>", reason)
                dropped.append(DroppedOperation(op, reason))
            else:
                changes.append(SourceCodeChange(ct, et, path, op.line))
        return changes, dropped


def classify_with_drops(ops: Sequence[EditOperation], taxonomy: Optional[ChangeTaxonomy] = None,
                        path: str = "", strict: bool = False):
    return Classifier(taxonomy, strict).classify(ops, path)


def classify(ops: Sequence[EditOperation], taxonomy: Optional[ChangeTaxonomy] = None,
             path: str = "", strict: bool = False) -> list[SourceCodeChange]:
    return classify_with_drops(ops, taxonomy, path, strict)[0]
