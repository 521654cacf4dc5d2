"""Expression trees for engineered features: evaluation, variation, parsing.

Trees are single-typed over reals; boolean operators encode truth as 0/1 and
threshold their inputs at 0.5. Division is protected and every operator's
output is clipped so evaluation is closed over finite inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

# values are clipped here after every operator so no overflow reaches inf
_CLIP = 1e12
_DIV_GUARD = 1e-6


def _protected_div(a, b):
    return np.where(np.abs(b) < _DIV_GUARD, 1.0, a / np.where(np.abs(b) < _DIV_GUARD, 1.0, b))


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


UNARY_OPS = {
    "tanh": np.tanh,
    "relu": lambda a: np.maximum(a, 0.0),
    "logistic": _logistic,
    "not": lambda a: (a <= 0.5).astype(float),
}

BINARY_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": _protected_div,
    "lt": lambda a, b: (a < b).astype(float),
    "gt": lambda a, b: (a > b).astype(float),
    "and": lambda a, b: ((a > 0.5) & (b > 0.5)).astype(float),
    "or": lambda a, b: ((a > 0.5) | (b > 0.5)).astype(float),
}

ALL_OPS = sorted(UNARY_OPS) + sorted(BINARY_OPS)


@dataclass(frozen=True)
class Node:
    """One tree node: an operator, a feature variable, or a constant."""

    kind: str                      # operator name, "var", or "const"
    children: tuple["Node", ...] = ()
    index: int | None = None       # feature index for "var"
    value: float | None = None     # payload for "const"

    def __post_init__(self):
        if self.kind == "var":
            assert self.index is not None and not self.children
        elif self.kind == "const":
            assert self.value is not None and not self.children
        elif self.kind in UNARY_OPS:
            assert len(self.children) == 1
        elif self.kind in BINARY_OPS:
            assert len(self.children) == 2
        else:
            raise ValueError(f"unknown node kind {self.kind!r}")


@dataclass(frozen=True)
class Program:
    """An immutable expression tree over dataset features."""

    root: Node

    def depth(self) -> int:
        return _depth(self.root)

    def size(self) -> int:
        return _size(self.root)

    def max_feature_index(self) -> int:
        return _max_index(self.root)

    def __str__(self) -> str:
        return _to_string(self.root)


def _depth(node: Node) -> int:
    if not node.children:
        return 1
    return 1 + max(_depth(c) for c in node.children)


def _size(node: Node) -> int:
    return 1 + sum(_size(c) for c in node.children)


def _max_index(node: Node) -> int:
    own = node.index if node.kind == "var" else -1
    return max([own] + [_max_index(c) for c in node.children])


def _to_string(node: Node) -> str:
    if node.kind == "var":
        return f"x{node.index}"
    if node.kind == "const":
        return repr(node.value)
    args = ",".join(_to_string(c) for c in node.children)
    return f"{node.kind}({args})"


def _eval_node(node: Node, X: np.ndarray) -> np.ndarray:
    if node.kind == "var":
        return X[:, node.index].astype(float)
    if node.kind == "const":
        return np.full(X.shape[0], node.value, dtype=float)
    args = [_eval_node(c, X) for c in node.children]
    fn = UNARY_OPS.get(node.kind) or BINARY_OPS[node.kind]
    return np.clip(fn(*args), -_CLIP, _CLIP)


def eval_program(prog: Program, ds: Dataset) -> np.ndarray:
    """Evaluate prog on every row of ds; outputs are always finite."""
    return eval_on_matrix(prog, ds.feature_matrix)


def eval_on_matrix(prog: Program, X: np.ndarray) -> np.ndarray:
    out = _eval_node(prog.root, X)
    return np.ascontiguousarray(out, dtype=float)


def _random_terminal(d: int, rng: np.random.Generator) -> Node:
    if rng.random() < 0.8:
        return Node("var", index=int(rng.integers(d)))
    return Node("const", value=float(rng.uniform(-1.0, 1.0)))


def _grow(d: int, depth_left: int, rng: np.random.Generator) -> Node:
    # grow method: terminals may appear before the depth limit
    if depth_left <= 1 or rng.random() < 0.3:
        return _random_terminal(d, rng)
    kind = ALL_OPS[int(rng.integers(len(ALL_OPS)))]
    arity = 1 if kind in UNARY_OPS else 2
    return Node(kind, children=tuple(_grow(d, depth_left - 1, rng) for _ in range(arity)))


def random_program(d: int, max_depth: int, rng: np.random.Generator) -> Program:
    """Grow a random tree of depth <= max_depth over d features."""
    assert d >= 1 and max_depth >= 1
    return Program(_grow(d, max_depth, rng))


def _nodes_with_depth(node: Node, depth: int = 1):
    """Yield (path, node, depth); path is a tuple of child positions."""
    yield (), node, depth
    for i, c in enumerate(node.children):
        for path, n, dep in _nodes_with_depth(c, depth + 1):
            yield (i,) + path, n, dep


def _replace_at(node: Node, path: tuple[int, ...], repl: Node) -> Node:
    if not path:
        return repl
    i = path[0]
    children = tuple(
        _replace_at(c, path[1:], repl) if j == i else c
        for j, c in enumerate(node.children)
    )
    return Node(node.kind, children=children, index=node.index, value=node.value)


def _point_change(node: Node, d: int, rng: np.random.Generator) -> Node:
    if node.kind in ("var", "const"):
        return _random_terminal(d, rng)
    pool = UNARY_OPS if node.kind in UNARY_OPS else BINARY_OPS
    alternatives = sorted(k for k in pool if k != node.kind)
    kind = alternatives[int(rng.integers(len(alternatives)))]
    return Node(kind, children=node.children)


def mutate(prog: Program, d: int, max_depth: int, rng: np.random.Generator) -> Program:
    """Apply one edit chosen uniformly among applicable edit kinds."""
    spots = list(_nodes_with_depth(prog.root))
    has_function = any(n.children for _, n, _ in spots)
    edits = ["point", "replace"] + (["delete"] if has_function else [])
    edit = edits[int(rng.integers(len(edits)))]

    if edit == "point":
        path, node, _ = spots[int(rng.integers(len(spots)))]
        return Program(_replace_at(prog.root, path, _point_change(node, d, rng)))
    if edit == "replace":
        path, _, depth = spots[int(rng.integers(len(spots)))]
        sub = _grow(d, max_depth - depth + 1, rng)
        return Program(_replace_at(prog.root, path, sub))
    # delete: hoist a random child of a random function node
    fn_spots = [(p, n) for p, n, _ in spots if n.children]
    path, node = fn_spots[int(rng.integers(len(fn_spots)))]
    child = node.children[int(rng.integers(len(node.children)))]
    return Program(_replace_at(prog.root, path, child))


def crossover(a: Program, b: Program, max_depth: int, rng: np.random.Generator) -> Program:
    """Graft a uniformly chosen subtree of b onto a uniformly chosen spot of a.

    Resamples up to 20 times if the offspring would exceed max_depth, then
    returns a unchanged.
    """
    a_spots = list(_nodes_with_depth(a.root))
    b_spots = list(_nodes_with_depth(b.root))
    for _ in range(20):
        path, _, depth = a_spots[int(rng.integers(len(a_spots)))]
        _, donor, _ = b_spots[int(rng.integers(len(b_spots)))]
        if depth - 1 + _depth(donor) <= max_depth:
            return Program(_replace_at(a.root, path, donor))
    return a


def parse_program(text: str) -> Program:
    """Parse the prefix string form produced by str(Program)."""
    pos = 0

    def skip_ws():
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def parse_node() -> Node:
        nonlocal pos
        skip_ws()
        start = pos
        while pos < len(text) and (text[pos].isalnum() or text[pos] in "._+-"):
            pos += 1
        token = text[start:pos]
        if not token:
            raise ValueError(f"parse error at position {pos} in {text!r}")
        skip_ws()
        if pos < len(text) and text[pos] == "(":
            pos += 1
            children = [parse_node()]
            skip_ws()
            while pos < len(text) and text[pos] == ",":
                pos += 1
                children.append(parse_node())
                skip_ws()
            if pos >= len(text) or text[pos] != ")":
                raise ValueError(f"expected ')' at position {pos} in {text!r}")
            pos += 1
            return Node(token, children=tuple(children))
        if token.startswith("x") and token[1:].isdigit():
            return Node("var", index=int(token[1:]))
        return Node("const", value=float(token))

    node = parse_node()
    skip_ws()
    if pos != len(text):
        raise ValueError(f"trailing input at position {pos} in {text!r}")
    return Program(node)
