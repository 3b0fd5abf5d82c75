"""Newick tree parsing, validation, and coalescence-time extraction.

Real genealogies arrive as rooted ultrametric Newick trees. This module
parses them (quoted labels and bracket comments included), validates that
they are binary and ultrametric within a relative tolerance, extracts the
internal-node heights as order-statistic coalescence times, and measures the
topology-true internal branch length used by the lengths-based estimator.
The inverse direction, building the coalescent-point-process tree from
branch-ordered times and serializing it canonically, lives here too.

Parsing and traversal are iterative throughout, so deeply nested comb trees
cannot overflow the interpreter stack; every malformed input surfaces as a
structured ParseError.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coalescent import CoalescenceTimes
from .errors import (
    MissingBranchLength,
    NotBinary,
    NotUltrametric,
    ParseError,
    RelativeAxisError,
    SampleTooSmall,
)

DEFAULT_ULTRAMETRIC_TOL = 1e-6

_LABEL_TERMINATORS = set("():,;[")


@dataclass
class TreeNode:
    label: str | None = None
    length: float | None = None
    children: list["TreeNode"] = field(default_factory=list)

    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class SampleTree:
    """Rooted tree with branch lengths.

    root_stem is the edge above the root node; stem_from_input records
    whether it was explicitly present in parsed text. Synthetic stems added
    by the point-process builder are excluded from internal-length sums, so
    the tree-based length agrees exactly with the branch-order formula.
    """

    root: TreeNode
    root_stem: float | None = None
    stem_from_input: bool = False

    def tips(self) -> list[TreeNode]:
        out: list[TreeNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf():
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    @property
    def n_tips(self) -> int:
        return len(self.tips())

    @property
    def tip_labels(self) -> list[str | None]:
        return [t.label for t in self.tips()]


def _postorder(root: TreeNode) -> list[TreeNode]:
    """Nodes ordered children-before-parent, without recursion."""
    order: list[TreeNode] = []
    stack = [root]
    while stack:
        node = stack.pop()
        order.append(node)
        stack.extend(node.children)
    order.reverse()
    return order


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str | None:
        return self.text[self.pos] if self.pos < len(self.text) else None

    def skip_filler(self):
        """Skip whitespace and bracketed comments."""
        while True:
            c = self.peek()
            if c is not None and c.isspace():
                self.pos += 1
            elif c == "[":
                end = self.text.find("]", self.pos + 1)
                if end < 0:
                    raise ParseError(self.pos, "']' closing comment")
                self.pos = end + 1
            else:
                return


def _parse_label(cur: _Cursor) -> str | None:
    cur.skip_filler()
    c = cur.peek()
    if c == "'":
        start = cur.pos
        cur.pos += 1
        chunks = []
        while True:
            c = cur.peek()
            if c is None:
                raise ParseError(start, "closing quote for label")
            cur.pos += 1
            if c == "'":
                if cur.peek() == "'":  # doubled quote escapes a quote
                    chunks.append("'")
                    cur.pos += 1
                else:
                    return "".join(chunks)
            else:
                chunks.append(c)
    chunks = []
    while True:
        c = cur.peek()
        if c is None or c in _LABEL_TERMINATORS or c.isspace():
            break
        chunks.append(c)
        cur.pos += 1
    return "".join(chunks) or None


def _parse_length(cur: _Cursor) -> float | None:
    cur.skip_filler()
    if cur.peek() != ":":
        return None
    cur.pos += 1
    cur.skip_filler()
    start = cur.pos
    while True:
        c = cur.peek()
        if c is None or c in _LABEL_TERMINATORS or c.isspace():
            break
        cur.pos += 1
    token = cur.text[start:cur.pos]
    try:
        value = float(token)
    except ValueError:
        raise ParseError(start, "branch length after ':'") from None
    if not np.isfinite(value):
        raise ParseError(start, "finite branch length")
    return value


def _parse_one(cur: _Cursor) -> TreeNode:
    """Parse one subtree with an explicit stack of open groups."""
    stack: list[TreeNode] = []
    while True:
        cur.skip_filler()
        if cur.peek() == "(":
            cur.pos += 1
            stack.append(TreeNode())
            continue
        label = _parse_label(cur)
        length = _parse_length(cur)
        if label is None and length is None:
            # bare empty node is only tolerable inside a group
            if not stack or cur.peek() not in (",", ")"):
                raise ParseError(cur.pos, "leaf label or '('")
        current = TreeNode(label=label, length=length)
        while True:
            if not stack:
                return current
            stack[-1].children.append(current)
            cur.skip_filler()
            c = cur.peek()
            if c == ",":
                cur.pos += 1
                break
            if c == ")":
                cur.pos += 1
                node = stack.pop()
                node.label = _parse_label(cur)
                node.length = _parse_length(cur)
                current = node
                continue
            raise ParseError(cur.pos, "',' or ')'")


def _require_lengths(root: TreeNode):
    stack = [root]
    while stack:
        node = stack.pop()
        for child in node.children:
            if child.length is None:
                where = child.label or "internal node"
                raise MissingBranchLength(f"edge above {where!r} has no branch length")
            stack.append(child)


def _finish_tree(root: TreeNode) -> SampleTree:
    _require_lengths(root)
    stem = root.length
    root.length = None
    return SampleTree(root=root, root_stem=stem, stem_from_input=stem is not None)


def parse_newick(text: str) -> SampleTree:
    """Parse a single Newick tree.

    Standard grammar: nested parentheses, optional (possibly quoted) labels,
    ':'-prefixed branch lengths, bracket comments, terminating ';'. Every
    edge except the root stem must carry a length, since the trees are bound
    for estimation. Multifurcations parse fine; they are rejected later,
    where the rejection can cite the offending node.
    """
    if not isinstance(text, str) or not text.strip():
        raise ParseError(0, "nonempty Newick text")
    cur = _Cursor(text)
    root = _parse_one(cur)
    cur.skip_filler()
    if cur.peek() != ";":
        raise ParseError(cur.pos, "';' terminating the tree")
    cur.pos += 1
    cur.skip_filler()
    if cur.peek() is not None:
        raise ParseError(cur.pos, "end of input after ';'")
    return _finish_tree(root)


def parse_newick_trees(text: str) -> list[SampleTree]:
    """Parse a ';'-separated multi-tree string."""
    trees = []
    cur = _Cursor(text)
    while True:
        cur.skip_filler()
        if cur.peek() is None:
            break
        root = _parse_one(cur)
        cur.skip_filler()
        if cur.peek() != ";":
            raise ParseError(cur.pos, "';' terminating the tree")
        cur.pos += 1
        trees.append(_finish_tree(root))
    if not trees:
        raise ParseError(0, "at least one tree")
    return trees


# ---------------------------------------------------------------------------
# Validation and extraction
# ---------------------------------------------------------------------------


def _check_binary(root: TreeNode):
    for node in _postorder(root):
        if node.children and len(node.children) != 2:
            raise NotBinary(
                f"node {node.label or '(unnamed)'} has {len(node.children)} children"
            )


def extract_coalescence_times(
    tree: SampleTree, tol: float = DEFAULT_ULTRAMETRIC_TOL
) -> CoalescenceTimes:
    """Internal-node heights of a binary ultrametric tree, largest first.

    Heights are measured from the tips; under rounding jitter within the
    tolerance each node's height is the mean of its tip distances, which is
    unbiased for symmetric rounding noise. Branch order is not recoverable
    from a plain tree, so the result carries only order statistics.
    """
    n = tree.n_tips
    if n < 2:
        raise SampleTooSmall("need at least 2 tips to have a coalescence")
    _check_binary(tree.root)

    counts: dict[int, int] = {}
    totals: dict[int, float] = {}  # summed distance from node down to its tips
    heights = []
    for node in _postorder(tree.root):
        if node.is_leaf():
            counts[id(node)] = 1
            totals[id(node)] = 0.0
            continue
        count, total = 0, 0.0
        for child in node.children:
            count += counts[id(child)]
            total += totals[id(child)] + counts[id(child)] * (child.length or 0.0)
        counts[id(node)] = count
        totals[id(node)] = total
        heights.append(total / count)

    tip_depths = _tip_depths(tree)
    height = float(tip_depths.max())
    if height > 0:
        worst = float(np.max(np.abs(tip_depths - height))) / height
        if worst > tol:
            raise NotUltrametric(worst, tol)

    heights.sort(reverse=True)
    t = height + (tree.root_stem or 0.0)
    return CoalescenceTimes(n, tuple(heights), t=t, branch_order=False)


def _tip_depths(tree: SampleTree) -> np.ndarray:
    depths = {id(tree.root): 0.0}
    out = []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.is_leaf():
            out.append(depths[id(node)])
        for child in node.children:
            depths[id(child)] = depths[id(node)] + (child.length or 0.0)
            stack.append(child)
    return np.array(out)


def tree_internal_branch_length(tree: SampleTree) -> float:
    """Sum of branch lengths of edges ancestral to two or more tips.

    A root stem counts only when it was explicitly present in the parsed
    input; the stem above the most recent common ancestor is otherwise not
    part of the sample genealogy.
    """
    if tree.n_tips < 3:
        raise SampleTooSmall("internal branch length needs at least 3 tips")
    counts: dict[int, int] = {}
    total = 0.0
    for node in _postorder(tree.root):
        if node.is_leaf():
            counts[id(node)] = 1
            continue
        counts[id(node)] = sum(counts[id(c)] for c in node.children)
    for node in _postorder(tree.root):
        for child in node.children:
            if counts[id(child)] >= 2:
                total += child.length or 0.0
    if tree.stem_from_input and tree.root_stem is not None:
        total += tree.root_stem
    return total


# ---------------------------------------------------------------------------
# Coalescent-point-process tree construction
# ---------------------------------------------------------------------------


def build_cpp_tree(times: CoalescenceTimes) -> SampleTree:
    """Build the point-process tree: a height-T spine, then one branch per time.

    Branch i (height H_i) joins leftward at its top into the nearest earlier
    branch that is taller, which makes the tree the max-Cartesian tree of
    the height sequence with tips in the gaps. Tips are labelled t1..tn in
    branch order; internal node depths from the tips are exactly the H_i and
    the synthetic stem of length T - max(H) preserves the total height T.
    """
    if times.relative or times.t is None:
        raise RelativeAxisError("building a tree needs absolute-axis times with T")
    heights = times.as_array()
    if np.any(heights <= 0):
        raise ValueError("coalescence times must be positive to build a tree")
    if np.any(heights >= times.t):
        raise ValueError("coalescence times must lie below the tree height T")

    # stack of (line height, subtree hanging on that line); heights decrease
    # from the spine at the bottom of the stack to the newest line on top
    stack: list[tuple[float, TreeNode]] = [(np.inf, TreeNode(label="t1"))]
    node_height: dict[int, float] = {}

    def merge_top():
        top_h, top_tree = stack.pop()
        prev_h, prev_tree = stack.pop()
        joined = TreeNode(children=[prev_tree, top_tree])
        node_height[id(joined)] = top_h
        stack.append((prev_h, joined))

    for i, h in enumerate(heights, start=2):
        while stack[-1][0] < h:
            merge_top()
        stack.append((float(h), TreeNode(label=f"t{i}")))
    while len(stack) > 1:
        merge_top()

    root = stack[0][1]
    todo = [(root, node_height[id(root)])]
    while todo:
        node, h = todo.pop()
        for child in node.children:
            ch = node_height.get(id(child), 0.0)
            child.length = h - ch
            if child.children:
                todo.append((child, ch))
    return SampleTree(root=root, root_stem=float(times.t) - node_height[id(root)])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _quote_label(label: str) -> str:
    if label and not any(c in _LABEL_TERMINATORS or c.isspace() or c == "'" for c in label):
        return label
    return "'" + label.replace("'", "''") + "'"


def _format_length(x: float) -> str:
    return format(x, ".12g")


def serialize_newick(tree: SampleTree) -> str:
    """Canonical Newick text: children ordered by smallest tip label,
    lengths printed with 12 significant digits, ';'-terminated."""
    min_label: dict[int, str] = {}
    for node in _postorder(tree.root):
        if node.is_leaf():
            min_label[id(node)] = node.label or ""
        else:
            min_label[id(node)] = min(min_label[id(c)] for c in node.children)

    rendered: dict[int, str] = {}
    for node in _postorder(tree.root):
        if node.is_leaf():
            text = _quote_label(node.label or "")
        else:
            ordered = sorted(node.children, key=lambda c: min_label[id(c)])
            inner = ",".join(rendered[id(c)] for c in ordered)
            text = f"({inner})" + (_quote_label(node.label) if node.label else "")
        if node is not tree.root and node.length is not None:
            text += ":" + _format_length(node.length)
        rendered[id(node)] = text

    text = rendered[id(tree.root)]
    if tree.root_stem is not None:
        text += ":" + _format_length(tree.root_stem)
    return text + ";"
