"""Typed syntax trees shared by the parser, the differ and the classifier."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from repair_miner.errors import TaxonomyError, TreeInvariantError

Range = tuple[int, int, int, int]


@dataclass(frozen=True)
class TreeNode:
    """One AST node.

    ``range`` is ``(start_line, start_col, end_line, end_col)``, 1-based, with
    the end column pointing one past the last character.
    """

    kind: str
    value: Optional[str] = None
    range: Range = (1, 1, 1, 1)
    children: tuple["TreeNode", ...] = ()

    def __post_init__(self):
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))
        if self.value == "":
            object.__setattr__(self, "value", None)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def preorder(self) -> Iterator["TreeNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def shape(self):
        """Nested ``(kind, value, children)`` tuples; ranges are ignored."""
        return (self.kind, self.value, tuple(c.shape() for c in self.children))

    def size(self) -> int:
        return sum(1 for _ in self.preorder())


@dataclass(frozen=True)
class SourceTree:
    root: TreeNode
    path: str = ""
    revision: str = ""
    _nodes: tuple[TreeNode, ...] = field(init=False, repr=False, compare=False)
    _parents: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _sizes: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes: list[TreeNode] = []
        parents: list[int] = []
        stack: list[tuple[TreeNode, int]] = [(self.root, -1)]
        while stack:
            node, parent = stack.pop()
            idx = len(nodes)
            nodes.append(node)
            parents.append(parent)
            stack.extend((child, idx) for child in reversed(node.children))
        object.__setattr__(self, "_nodes", tuple(nodes))
        sizes = [1] * len(nodes)
        for idx in range(len(nodes) - 1, 0, -1):
            sizes[parents[idx]] += sizes[idx]
        object.__setattr__(self, "_parents", tuple(parents))
        object.__setattr__(self, "_sizes", tuple(sizes))

    # Node ids are preorder positions.
    @property
    def nodes(self) -> tuple[TreeNode, ...]:
        return self._nodes

    def node(self, node_id: int) -> TreeNode:
        return self._nodes[node_id]

    def parent(self, node_id: int) -> Optional[int]:
        p = self._parents[node_id]
        return None if p < 0 else p

    def children(self, node_id: int) -> list[int]:
        out = []
        child = node_id + 1
        for _ in self._nodes[node_id].children:
            out.append(child)
            child += self._sizes[child]
        return out

    def subtree(self, node_id: int) -> range:
        return range(node_id, node_id + self._sizes[node_id])

    def ancestors(self, node_id: int) -> Iterator[int]:
        p = self.parent(node_id)
        while p is not None:
            yield p
            p = self.parent(p)

    def __len__(self) -> int:
        return len(self._nodes)

    def shape(self):
        return self.root.shape()


def empty_tree(path: str = "", revision: str = "") -> SourceTree:
    return SourceTree(TreeNode("compilation_unit"), path, revision)


def _before(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a <= b


def check_node(node: TreeNode, taxonomy=None, root_kinds=("compilation_unit",), where="root") -> None:
    """Raise :class:`TreeInvariantError` if ``node`` or a descendant breaks a tree invariant."""
    stack = [(node, where, True)]
    while stack:
        cur, loc, is_root = stack.pop()
        if taxonomy is not None and cur.kind not in taxonomy:
            raise TaxonomyError(f"unknown entity kind {cur.kind!r} at {loc}", kind=cur.kind)
        sl, sc, el, ec = cur.range
        if min(cur.range) < 1 or (el, ec) < (sl, sc):
            raise TreeInvariantError(f"invalid range {cur.range} at {loc}")
        if cur.is_leaf and not cur.value and not (is_root and cur.kind in root_kinds):
            raise TreeInvariantError(f"leaf {cur.kind!r} without value at {loc}")
        prev_end = (sl, sc)
        for i, child in enumerate(cur.children):
            csl, csc, cel, cec = child.range
            if not _before((sl, sc), (csl, csc)) or not _before((cel, cec), (el, ec)):
                raise TreeInvariantError(
                    f"range of {loc}.children[{i}] {child.range} extends past parent range {cur.range}"
                )
            if (csl, csc) < prev_end:
                raise TreeInvariantError(f"{loc}.children[{i}] overlaps its previous sibling")
            prev_end = (cel, cec)
            stack.append((child, f"{loc}.children[{i}]", False))


def validate(tree: SourceTree, taxonomy=None) -> SourceTree:
    roots = taxonomy.root_kinds if taxonomy is not None else ("compilation_unit",)
    if tree.root.kind not in roots:
        raise TreeInvariantError(f"root kind {tree.root.kind!r} is not a compilation-unit kind")
    check_node(tree.root, taxonomy, roots)
    return tree
