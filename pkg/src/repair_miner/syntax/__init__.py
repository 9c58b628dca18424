from repair_miner.syntax.interchange import parse_interchange, serialize_interchange, tree_from_record, tree_to_record
from repair_miner.syntax.minijava import parse_mini_java
from repair_miner.syntax.taxonomy import EntityTaxonomy, default_taxonomy, display, load_config
from repair_miner.syntax.tree import SourceTree, TreeNode, empty_tree, validate

__all__ = [
    "EntityTaxonomy",
    "SourceTree",
    "TreeNode",
    "default_taxonomy",
    "display",
    "empty_tree",
    "load_config",
    "parse_interchange",
    "parse_mini_java",
    "serialize_interchange",
    "tree_from_record",
    "tree_to_record",
    "validate",
]
