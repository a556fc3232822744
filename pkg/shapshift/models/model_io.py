#!/usr/bin/env python3
# -*- coding: utf-8 -*-

#----------------#
# Import modules #
#----------------#

import os
from pathlib import Path

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string

from shapshift.data_handling.file_io import write_text_atomic
from shapshift.models.gbdt import GbdtModel, ModelFormatError, RegressionTree, TreeNode

#------------------#
# Define functions #
#------------------#

# Serialization #
#---------------#

def model_to_text(model: GbdtModel) -> str:
    """
    Render 'model' in the line-oriented text format.

    Layout::

        base_score=<float>
        learning_rate=<float>
        feature_names=<name;name;...>
        n_trees=<count>
        tree <index> <n_nodes>
        <id> <split|leaf> <feature> <threshold> <left> <right> <cover> <value>
        ...

    Floats use their shortest round-trip text, so loading gives back the
    exact same model.
    """
    lines = [
        f"base_score={model.base_score!r}",
        f"learning_rate={model.learning_rate!r}",
        f"feature_names={FEATURE_SEPARATOR.join(model.feature_names)}",
        f"n_trees={model.n_trees}",
    ]
    for tree_idx, tree in enumerate(model.trees):
        lines.append(f"tree {tree_idx} {tree.n_nodes}")
        for node in tree.nodes():
            kind = "leaf" if node.is_leaf else "split"
            lines.append(f"{node.node_id} {kind} {node.feature_index} {node.threshold!r} "
                         f"{node.left} {node.right} {node.cover} {node.value!r}")
    return "\n".join(lines) + "\n"


def save_model(model: GbdtModel, path: str | Path) -> str:
    """Write 'model' to 'path' ('.txt' appended when missing)."""
    return write_text_atomic(path, model_to_text(model), extension="txt")


# Parsing #
#---------#

def _header_value(lines: list[str], line_no: int, key: str) -> str:
    if line_no >= len(lines):
        raise ModelFormatError(format_string(TRUNCATED_ERROR_TEMPLATE, (key,)))
    line = lines[line_no]
    prefix = f"{key}="
    if not line.startswith(prefix):
        raise ModelFormatError(format_string(HEADER_KEY_ERROR_TEMPLATE,
                                             (line_no + 1, key, line)))
    return line[len(prefix):]


def _parse_number(text: str, cast, line_no: int):
    try:
        return cast(text)
    except ValueError:
        raise ModelFormatError(format_string(BAD_NUMBER_ERROR_TEMPLATE, (line_no + 1, text)))


def _parse_node(line: str, line_no: int) -> TreeNode:
    fields = line.split()
    if len(fields) != 8:
        raise ModelFormatError(format_string(NODE_FIELDS_ERROR_TEMPLATE,
                                             (line_no + 1, len(fields))))
    node_id, kind, feature, threshold, left, right, cover, value = fields
    if kind not in ("split", "leaf"):
        raise ModelFormatError(format_string(NODE_KIND_ERROR_TEMPLATE, (line_no + 1, kind)))

    node = TreeNode(node_id=_parse_number(node_id, int, line_no),
                    feature_index=_parse_number(feature, int, line_no),
                    threshold=_parse_number(threshold, float, line_no),
                    left=_parse_number(left, int, line_no),
                    right=_parse_number(right, int, line_no),
                    cover=_parse_number(cover, int, line_no),
                    value=_parse_number(value, float, line_no))
    if (kind == "leaf") != node.is_leaf:
        raise ModelFormatError(format_string(NODE_KIND_ERROR_TEMPLATE, (line_no + 1, kind)))
    return node


def model_from_text(text: str) -> GbdtModel:
    """
    Parse the text format produced by 'model_to_text'.

    Every tree invariant (forward child ids, cover sums, finite leaves,
    feature indices in range) is checked on load.

    Raises
    ------
    ModelFormatError
        On any syntactic or structural problem, naming the offending line.
    """
    lines = [line.strip() for line in text.splitlines() if line.strip()]

    base_score = _parse_number(_header_value(lines, 0, "base_score"), float, 0)
    learning_rate = _parse_number(_header_value(lines, 1, "learning_rate"), float, 1)
    names_field = _header_value(lines, 2, "feature_names")
    feature_names = tuple(names_field.split(FEATURE_SEPARATOR)) if names_field else ()
    n_trees = _parse_number(_header_value(lines, 3, "n_trees"), int, 3)

    trees = []
    line_no = 4
    for tree_idx in range(n_trees):
        if line_no >= len(lines):
            raise ModelFormatError(format_string(TRUNCATED_ERROR_TEMPLATE, (f"tree {tree_idx}",)))
        fields = lines[line_no].split()
        if len(fields) != 3 or fields[0] != "tree" or fields[1] != str(tree_idx):
            raise ModelFormatError(format_string(TREE_HEADER_ERROR_TEMPLATE,
                                                 (line_no + 1, tree_idx, lines[line_no])))
        n_nodes = _parse_number(fields[2], int, line_no)
        node_lines = lines[line_no + 1:line_no + 1 + n_nodes]
        if len(node_lines) != n_nodes:
            raise ModelFormatError(format_string(TRUNCATED_ERROR_TEMPLATE, (f"tree {tree_idx}",)))
        nodes = [_parse_node(node_line, line_no + 1 + offset)
                 for offset, node_line in enumerate(node_lines)]
        trees.append(RegressionTree.from_nodes(nodes))
        line_no += 1 + n_nodes

    if line_no != len(lines):
        raise ModelFormatError(format_string(TRAILING_ERROR_TEMPLATE, (line_no + 1,)))

    return GbdtModel(base_score=base_score,
                     trees=tuple(trees),
                     learning_rate=learning_rate,
                     feature_names=feature_names)


def load_model(path: str | Path) -> GbdtModel:
    """Read a model written by 'save_model'."""
    path = str(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(format_string(FILE_NOT_FOUND_ERROR_TEMPLATE, (path,)))
    with open(path, encoding="utf-8") as file_obj:
        return model_from_text(file_obj.read())

#--------------------------#
# Parameters and constants #
#--------------------------#

FEATURE_SEPARATOR = ";"

# Error strings #
#---------------#

FILE_NOT_FOUND_ERROR_TEMPLATE = "Model file not found: '{}'"
TRUNCATED_ERROR_TEMPLATE = "Model text ends before '{}'."
HEADER_KEY_ERROR_TEMPLATE = "Line {}: expected '{}=...', got '{}'."
BAD_NUMBER_ERROR_TEMPLATE = "Line {}: cannot parse number '{}'."
NODE_FIELDS_ERROR_TEMPLATE = "Line {}: a node line needs 8 fields, got {}."
NODE_KIND_ERROR_TEMPLATE = "Line {}: node kind '{}' does not match its feature index."
TREE_HEADER_ERROR_TEMPLATE = "Line {}: expected header of tree {}, got '{}'."
TRAILING_ERROR_TEMPLATE = "Unexpected content from line {} on."
