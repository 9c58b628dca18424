"""Tree matching and edit-script generation.

Matching runs in passes:

1. roots of the same kind are matched;
2. leaves of the same kind are paired greedily by descending bigram (Dice)
   similarity of their values, keeping pairs at or above ``leaf_threshold``;
3. inner nodes (bottom-up) are paired with a same-kind node when more than
   ``inner_threshold`` of their leaves are matched into each other;
4. still-unmatched class/method nodes with equal names under matched parents
   are paired (signature matching);
5. children of kinds that occur once per parent (conditions, modifiers,
   return types, superclass) are paired under matched parents;
6. parameters and attributes of matched owners are paired by declared name,
   then leftover parameters by position when both sides have the same count.

Ties among equal-similarity candidates prefer pairs sharing enclosing
context (same parent, same enclosing class/method), then earliest document
order on the left, then on the right.
"""

from __future__ import annotations

import bisect
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional

from repair_miner.errors import InconsistentMatchingError
from repair_miner.syntax.taxonomy import EntityTaxonomy, default_taxonomy
from repair_miner.syntax.tree import Range, SourceTree, TreeNode

LEAF_THRESHOLD = 0.6
INNER_THRESHOLD = 0.5
UNIQUE_CHILD_KINDS = frozenset({"condition_expression", "modifiers", "return_type", "parent_class"})
DECLARATION_KINDS = ("parameter", "attribute")
_DECLARED_NAME = re.compile(r"([\w$]+)\s*(?:\[\s*\])*\s*(?:=.*)?$")


@lru_cache(maxsize=65536)
def _bigrams(text: str) -> Counter:
    return Counter(text[i:i + 2] for i in range(len(text) - 1))


def bigram_similarity(a: Optional[str], b: Optional[str]) -> float:
    """Dice coefficient over character bigram multisets."""
    a, b = a or "", b or ""
    if a == b:
        return 1.0
    ga, gb = _bigrams(a), _bigrams(b)
    total = sum(ga.values()) + sum(gb.values())
    if total == 0:
        return 0.0
    return 2.0 * sum((ga & gb).values()) / total


@dataclass
class NodeMatching:
    pairs: dict[int, int]  # left id -> right id
    similarity: dict[tuple[int, int], float]
    left_size: int
    right_size: int
    reverse: dict[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.reverse = {r: l for l, r in self.pairs.items()}
        if len(self.reverse) != len(self.pairs):
            raise InconsistentMatchingError("a right node appears in more than one pair")

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair) -> bool:
        left, right = pair
        return self.pairs.get(left) == right

    def partner_of_left(self, left: int) -> Optional[int]:
        return self.pairs.get(left)

    def partner_of_right(self, right: int) -> Optional[int]:
        return self.reverse.get(right)

    def inverse(self) -> "NodeMatching":
        return NodeMatching(
            dict(sorted(self.reverse.items())),
            {(r, l): s for (l, r), s in self.similarity.items()},
            self.right_size,
            self.left_size,
        )


def _structure_chain(tree: SourceTree, node_id: int, structure: frozenset) -> tuple:
    return tuple(
        (tree.node(a).kind, tree.node(a).value) for a in tree.ancestors(node_id) if tree.node(a).kind in structure
    )


def _declared_name(text: Optional[str]) -> Optional[str]:
    m = _DECLARED_NAME.search((text or "").split("=", 1)[0].strip())
    return m.group(1) if m else None


class _Matcher:
    def __init__(self, left: SourceTree, right: SourceTree, taxonomy: EntityTaxonomy,
                 leaf_threshold: float, inner_threshold: float):
        self.left, self.right = left, right
        self.tax = taxonomy
        self.leaf_threshold = leaf_threshold
        self.inner_threshold = inner_threshold
        self.l2r: dict[int, int] = {}
        self.r2l: dict[int, int] = {}
        self.sim: dict[tuple[int, int], float] = {}

    def add(self, l: int, r: int, s: float):
        self.l2r[l] = r
        self.r2l[r] = l
        self.sim[(l, r)] = s

    def context(self, l: int, r: int) -> int:
        structure = self.tax.structure_kinds
        lp, rp = self.left.parent(l), self.right.parent(r)
        score = 0
        if _structure_chain(self.left, l, structure) == _structure_chain(self.right, r, structure):
            score += 1
            if lp is not None and rp is not None:
                a, b = self.left.node(lp), self.right.node(rp)
                if (a.kind, a.value) == (b.kind, b.value):
                    score += 1
        return score

    def leaves(self, tree: SourceTree) -> dict[str, list[int]]:
        out = defaultdict(list)
        for i, node in enumerate(tree.nodes):
            if i and node.is_leaf:
                out[node.kind].append(i)
        return out

    def match_leaves(self):
        lleaves, rleaves = self.leaves(self.left), self.leaves(self.right)
        candidates = []
        for kind, lids in lleaves.items():
            rids = rleaves.get(kind, ())
            for l in lids:
                lv = self.left.node(l).value
                for r in rids:
                    s = bigram_similarity(lv, self.right.node(r).value)
                    if s >= self.leaf_threshold:
                        candidates.append((-s, -self.context(l, r), l, r))
        candidates.sort()
        for neg_s, _, l, r in candidates:
            if l not in self.l2r and r not in self.r2l:
                self.add(l, r, -neg_s)

    def leaf_ids(self, tree: SourceTree, node_id: int) -> list[int]:
        return [i for i in tree.subtree(node_id) if tree.node(i).is_leaf]

    def fraction(self, l: int, r: int) -> float:
        lleaves = self.leaf_ids(self.left, l)
        rrange = self.right.subtree(r)
        nr = sum(1 for i in rrange if self.right.node(i).is_leaf)
        common = sum(1 for i in lleaves if self.l2r.get(i, -1) in rrange)
        return common / max(len(lleaves), nr)

    def match_inner(self):
        rinner = defaultdict(list)
        for i, node in enumerate(self.right.nodes):
            if i and not node.is_leaf:
                rinner[node.kind].append(i)
        for l in range(len(self.left) - 1, 0, -1):
            lnode = self.left.node(l)
            if lnode.is_leaf or l in self.l2r:
                continue
            best = None
            for r in rinner.get(lnode.kind, ()):
                if r in self.r2l:
                    continue
                f = self.fraction(l, r)
                if f <= self.inner_threshold:
                    continue
                same_value = lnode.value == self.right.node(r).value
                key = (-f, not same_value, -self.context(l, r), r)
                if best is None or key < best[0]:
                    best = (key, r, f)
            if best is not None:
                self.add(l, best[1], best[2])

    def match_structure(self):
        structure = self.tax.structure_kinds
        for l in range(1, len(self.left)):
            lnode = self.left.node(l)
            if lnode.kind not in structure or l in self.l2r:
                continue
            lp = self.left.parent(l)
            rp = self.l2r.get(lp)
            if rp is None:
                continue
            for r in self.right.children(rp):
                rnode = self.right.node(r)
                if r not in self.r2l and rnode.kind == lnode.kind and rnode.value == lnode.value:
                    self.add(l, r, self.fraction(l, r))
                    break

    def match_unique_children(self):
        for l in range(len(self.left)):
            r = self.l2r.get(l)
            if r is None:
                continue
            lkids = defaultdict(list)
            rkids = defaultdict(list)
            for c in self.left.children(l):
                if self.left.node(c).kind in UNIQUE_CHILD_KINDS:
                    lkids[self.left.node(c).kind].append(c)
            for c in self.right.children(r):
                if self.right.node(c).kind in UNIQUE_CHILD_KINDS:
                    rkids[self.right.node(c).kind].append(c)
            for kind, lc in lkids.items():
                rc = rkids.get(kind, [])
                if len(lc) == 1 and len(rc) == 1 and lc[0] not in self.l2r and rc[0] not in self.r2l:
                    a, b = lc[0], rc[0]
                    self.add(a, b, bigram_similarity(self.left.node(a).value, self.right.node(b).value))

    def match_declarations(self):
        """Pair parameters/attributes of matched owners by declared name, then
        leftover parameters by position when both sides have the same number."""
        for l in range(len(self.left)):
            r = self.l2r.get(l)
            if r is None:
                continue
            for kind in DECLARATION_KINDS:
                lc = [c for c in self.left.children(l) if self.left.node(c).kind == kind and c not in self.l2r]
                rc = [c for c in self.right.children(r) if self.right.node(c).kind == kind and c not in self.r2l]
                if not lc or not rc:
                    continue
                by_name = {}
                for c in rc:
                    by_name.setdefault(_declared_name(self.right.node(c).value), c)
                for a in list(lc):
                    b = by_name.get(_declared_name(self.left.node(a).value))
                    if b is not None and b not in self.r2l:
                        self.add(a, b, bigram_similarity(self.left.node(a).value, self.right.node(b).value))
                        lc.remove(a)
                        rc.remove(b)
                if kind == "parameter" and lc and len(lc) == len(rc):
                    for a, b in zip(lc, rc):
                        self.add(a, b, bigram_similarity(self.left.node(a).value, self.right.node(b).value))

    def run(self) -> NodeMatching:
        if self.left.root.kind == self.right.root.kind:
            self.add(0, 0, 0.0)
        self.match_leaves()
        self.match_inner()
        self.match_structure()
        self.match_unique_children()
        self.match_declarations()
        if (0, 0) in self.sim:
            self.sim[(0, 0)] = self.fraction(0, 0) if len(self.left) > 1 or len(self.right) > 1 else 1.0
        return NodeMatching(dict(sorted(self.l2r.items())), self.sim, len(self.left), len(self.right))


def match_trees(left: SourceTree, right: SourceTree, taxonomy: Optional[EntityTaxonomy] = None,
                leaf_threshold: float = LEAF_THRESHOLD, inner_threshold: float = INNER_THRESHOLD) -> NodeMatching:
    return _Matcher(left, right, taxonomy or default_taxonomy(), leaf_threshold, inner_threshold).run()


class Op(str, Enum):
    INSERT = "INSERT"
    DELETE = "DELETE"
    UPDATE = "UPDATE"
    MOVE_PARENT = "MOVE_PARENT"
    MOVE_ORDER = "MOVE_ORDER"


@dataclass(frozen=True)
class EditOperation:
    """One atomic tree edit.

    ``left_id``/``right_id`` are preorder ids (``None`` where the node does not
    exist on that side). ``target_parent``/``index`` give the final position in
    the right tree for INSERT and MOVE_* operations. ``within`` is the kind of
    the outermost ancestor that is itself inserted (INSERT) or deleted
    (DELETE), if any.
    """

    op: Op
    kind: str
    left_id: Optional[int]
    right_id: Optional[int]
    value: Optional[str] = None
    new_value: Optional[str] = None
    parent_kind: Optional[str] = None
    statement_ancestor_kind: Optional[str] = None
    within: Optional[str] = None
    target_parent: Optional[int] = None
    index: Optional[int] = None
    range: Optional[Range] = None

    @property
    def line(self) -> int:
        return self.range[0] if self.range else 0


def _lis_keep(seq: list[int]) -> set[int]:
    """Positions (into ``seq``) of one longest strictly increasing subsequence."""
    tails: list[int] = []
    tails_idx: list[int] = []
    prev = [-1] * len(seq)
    for i, v in enumerate(seq):
        k = bisect.bisect_left(tails, v)
        if k == len(tails):
            tails.append(v)
            tails_idx.append(i)
        else:
            tails[k] = v
            tails_idx[k] = i
        prev[i] = tails_idx[k - 1] if k else -1
    keep = set()
    i = tails_idx[-1] if tails_idx else -1
    while i >= 0:
        keep.add(i)
        i = prev[i]
    return keep


def _check_matching(left: SourceTree, right: SourceTree, m: NodeMatching):
    if m.left_size != len(left) or m.right_size != len(right):
        raise InconsistentMatchingError(
            f"matching was computed for trees of sizes ({m.left_size}, {m.right_size}), "
            f"not ({len(left)}, {len(right)})"
        )
    for l, r in m.pairs.items():
        if not (0 <= l < len(left) and 0 <= r < len(right)):
            raise InconsistentMatchingError(f"pair ({l}, {r}) is out of range")
        if left.node(l).kind != right.node(r).kind:
            raise InconsistentMatchingError(
                f"pair ({l}, {r}) joins a {left.node(l).kind!r} with a {right.node(r).kind!r}"
            )


def _statement_ancestor(tree: SourceTree, node_id: int, tax: EntityTaxonomy) -> Optional[str]:
    for a in tree.ancestors(node_id):
        if tax.is_statement(tree.node(a).kind):
            return tree.node(a).kind
    return None


def _outermost_unmatched(tree: SourceTree, node_id: int, matched) -> Optional[str]:
    kind = None
    for a in tree.ancestors(node_id):
        if a not in matched:
            kind = tree.node(a).kind
    return kind


def edit_script(left: SourceTree, right: SourceTree, m: NodeMatching,
                taxonomy: Optional[EntityTaxonomy] = None) -> list[EditOperation]:
    tax = taxonomy or default_taxonomy()
    _check_matching(left, right, m)
    l2r, r2l = m.pairs, m.reverse

    def parent_kind(tree, i):
        p = tree.parent(i)
        return tree.node(p).kind if p is not None else None

    # Which matched right nodes are out of place, and how.
    moved: dict[int, Op] = {}
    for r in range(1, len(right)):
        l = r2l.get(r)
        if l is None:
            continue
        lp, rp = left.parent(l), right.parent(r)
        if lp is None or l2r.get(lp) != rp:
            moved[r] = Op.MOVE_PARENT
    for l in range(len(left)):
        r = l2r.get(l)
        if r is None:
            continue
        rkids = right.children(r)
        pos = {c: i for i, c in enumerate(rkids)}
        stay = [(c, pos[l2r[c]]) for c in left.children(l) if l2r.get(c) in pos and l2r[c] not in moved]
        keep = _lis_keep([p for _, p in stay])
        for i, (c, _) in enumerate(stay):
            if i not in keep:
                moved[l2r[c]] = Op.MOVE_ORDER

    ops: list[EditOperation] = []
    for l in range(len(left)):
        node = left.node(l)
        r = l2r.get(l)
        if r is None:
            ops.append(EditOperation(
                Op.DELETE, node.kind, l, None, node.value,
                parent_kind=parent_kind(left, l),
                statement_ancestor_kind=_statement_ancestor(left, l, tax),
                within=_outermost_unmatched(left, l, l2r),
                range=node.range,
            ))
        elif r not in moved and node.value != right.node(r).value:
            ops.append(EditOperation(
                Op.UPDATE, node.kind, l, r, node.value, right.node(r).value,
                parent_kind=parent_kind(left, l),
                statement_ancestor_kind=_statement_ancestor(left, l, tax),
                range=node.range,
            ))
    for r in range(len(right)):
        node = right.node(r)
        rp = right.parent(r)
        index = right.children(rp).index(r) if rp is not None else 0
        l = r2l.get(r)
        if l is None:
            ops.append(EditOperation(
                Op.INSERT, node.kind, None, r, node.value,
                parent_kind=parent_kind(right, r),
                statement_ancestor_kind=_statement_ancestor(right, r, tax),
                within=_outermost_unmatched(right, r, r2l),
                target_parent=rp, index=index, range=node.range,
            ))
        elif r in moved:
            old = left.node(l).value
            ops.append(EditOperation(
                moved[r], node.kind, l, r, old, node.value if node.value != old else None,
                parent_kind=parent_kind(right, r),
                statement_ancestor_kind=_statement_ancestor(right, r, tax),
                target_parent=rp, index=index, range=left.node(l).range,
            ))
    return ops


class _MNode:
    __slots__ = ("kind", "value", "range", "children", "parent")

    def __init__(self, kind, value, rng):
        self.kind, self.value, self.range = kind, value, rng
        self.children: list[_MNode] = []
        self.parent: Optional[_MNode] = None

    def detach(self):
        if self.parent is not None:
            self.parent.children.remove(self)
            self.parent = None

    def freeze(self) -> TreeNode:
        return TreeNode(self.kind, self.value, self.range, tuple(c.freeze() for c in self.children))


def apply_edit_script(left: SourceTree, script: list[EditOperation], m: NodeMatching) -> SourceTree:
    """Replay ``script`` over a mutable copy of ``left``; returns the resulting tree."""
    lnodes = [_MNode(n.kind, n.value, n.range) for n in left.nodes]
    for i in range(1, len(left)):
        p = lnodes[left.parent(i)]
        lnodes[i].parent = p
        p.children.append(lnodes[i])
    rmap = {r: lnodes[l] for l, r in m.pairs.items()}
    root = lnodes[0]

    for op in script:
        if op.op in (Op.MOVE_PARENT, Op.MOVE_ORDER, Op.DELETE):
            lnodes[op.left_id].detach()
    for op in script:
        if op.op is Op.UPDATE or (op.op in (Op.MOVE_PARENT, Op.MOVE_ORDER) and op.new_value is not None):
            lnodes[op.left_id].value = op.new_value
    for op in script:
        if op.op not in (Op.INSERT, Op.MOVE_PARENT, Op.MOVE_ORDER):
            continue
        node = _MNode(op.kind, op.value, op.range) if op.op is Op.INSERT else lnodes[op.left_id]
        rmap[op.right_id] = node
        if op.target_parent is None:
            root = node
            continue
        parent = rmap[op.target_parent]
        parent.children.insert(op.index, node)
        node.parent = parent
    return SourceTree(root.freeze(), left.path, left.revision)


def diff(left: SourceTree, right: SourceTree, taxonomy: Optional[EntityTaxonomy] = None) -> list[EditOperation]:
    tax = taxonomy or default_taxonomy()
    return edit_script(left, right, match_trees(left, right, tax), tax)
