import json

import pytest

from repair_miner.errors import ParseError, TaxonomyError, TreeInvariantError, UnsupportedConstructError
from repair_miner.syntax import (
    TreeNode,
    SourceTree,
    default_taxonomy,
    empty_tree,
    parse_interchange,
    parse_mini_java,
    serialize_interchange,
    tree_to_record,
    validate,
)
from tests.conftest import DATA


def _doc(root):
    return json.dumps({"format": "repair-miner-tree", "version": 1, "origin": {"path": "", "revision": ""},
                       "root": root})


def test_single_node_document():
    tree = parse_interchange(_doc({"kind": "compilation_unit", "value": None, "range": [1, 1, 1, 1],
                                   "children": []}))
    assert len(tree) == 1
    assert tree.root.kind == "compilation_unit"


def test_child_range_outside_parent_is_rejected():
    root = {"kind": "compilation_unit", "value": None, "range": [1, 1, 2, 1], "children": [
        {"kind": "class", "value": "A", "range": [1, 1, 5, 1], "children": []}]}
    with pytest.raises(TreeInvariantError):
        parse_interchange(_doc(root))


def test_unknown_kind_names_the_kind():
    root = {"kind": "compilation_unit", "value": None, "range": [1, 1, 3, 1], "children": [
        {"kind": "lambda_expression", "value": "x", "range": [1, 1, 1, 5], "children": []}]}
    with pytest.raises(TaxonomyError) as info:
        parse_interchange(_doc(root))
    assert info.value.kind == "lambda_expression"


def test_malformed_json_reports_position():
    with pytest.raises(ParseError) as info:
        parse_interchange('{"format": "repair-miner-tree",\n  "version": }')
    assert info.value.line == 2


def test_gcd_golden_interchange(gcd_source):
    tree = parse_mini_java(gcd_source, path="BugGCD.java")
    golden = (DATA / "gcd.tree.json").read_text()
    assert serialize_interchange(tree) == golden
    kinds = [n.kind for n in tree.nodes]
    assert kinds.count("method") == 1
    assert kinds.count("while_statement") == 1
    # the loop body holds the if/else that shrinks a or b
    loop = kinds.index("while_statement")
    assert "if_statement" in kinds[loop:]


def test_gcd_interchange_parses_back(gcd_source):
    tree = parse_interchange((DATA / "gcd.tree.json").read_text())
    assert tree.shape() == parse_mini_java(gcd_source).shape()


def test_round_trip_is_a_fixed_point(gcd_source):
    tree = parse_mini_java(gcd_source)
    once = serialize_interchange(tree)
    again = serialize_interchange(parse_interchange(once))
    assert once == again
    assert parse_interchange(once).root == tree.root


def test_empty_compilation_unit_serializes_canonically():
    text = serialize_interchange(empty_tree())
    assert parse_interchange(text).root == empty_tree().root
    assert text.endswith("\n")


def test_smallest_statement_program():
    tree = parse_mini_java("class A { void m() { x = x + 1; } }")
    assigns = [n for n in tree.nodes if n.kind == "assignment"]
    assert [n.value for n in assigns] == ["x = x + 1"]


def test_while_listing_before_version():
    src = "class A {\n void m() {\n  while(i < MAX_VALUE){\n   op.createPanel(i);\n   i=i+1;\n  }\n }\n}\n"
    tree = parse_mini_java(src)
    loop = next(i for i, n in enumerate(tree.nodes) if n.kind == "while_statement")
    kinds = [tree.node(c).kind for c in tree.children(loop)]
    assert kinds == ["condition_expression", "method_invocation", "assignment"]


def test_unbalanced_class_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_mini_java("class A {")


@pytest.mark.parametrize("body", [
    "switch (x) { case 1: break; }",
    "synchronized (this) { x = 1; }",
    "assert x > 0;",
])
def test_out_of_subset_constructs(body):
    with pytest.raises(UnsupportedConstructError) as info:
        parse_mini_java("class A {\n void m() {\n  " + body + "\n }\n}\n")
    assert info.value.line == 3


def test_lexical_error_has_location():
    with pytest.raises(ParseError) as info:
        parse_mini_java("class A {\n void m() { x = `y`; }\n}")
    assert info.value.line == 2


def test_formatting_does_not_change_values():
    a = parse_mini_java("class A { int f(int a){ return a+1; } }")
    b = parse_mini_java("class A {\n  int f(int a) {\n    return a + 1;\n  }\n}\n")
    assert a.shape() == b.shape()


def test_parsed_kinds_are_in_taxonomy(gcd_source):
    tax = default_taxonomy()
    assert all(n.kind in tax for n in parse_mini_java(gcd_source).nodes)


def test_parsing_is_deterministic(gcd_source):
    assert tree_to_record(parse_mini_java(gcd_source)) == tree_to_record(parse_mini_java(gcd_source))


def test_leaf_without_value_is_rejected():
    with pytest.raises(TreeInvariantError):
        validate(SourceTree(TreeNode("compilation_unit", None, (1, 1, 3, 1), (
            TreeNode("assignment", None, (1, 1, 1, 5)),
        ))))


def test_attribute_keeps_declared_name():
    tree = parse_mini_java("class A {\n  private static final int LIMIT = 10;\n}\n")
    assert [n.value for n in tree.nodes if n.kind == "attribute"] == ["private static final int LIMIT = 10"]
