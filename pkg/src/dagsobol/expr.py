"""Arithmetic expressions for node functions.

The grammar is ``+ - * /``, power (``**`` or ``^``), parentheses, names and
numeric literals.  Expressions are parsed with :mod:`ast` and only the node
types above are accepted, so nothing else can be executed.
"""

from __future__ import annotations

import ast
import operator
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import SpecError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


@dataclass(frozen=True)
class Expression:
    source: str
    tree: ast.AST
    names: frozenset[str]

    def __call__(self, env: Mapping[str, object]):
        return _eval(self.tree, env)


def parse_expression(source: str) -> Expression:
    text = source.replace("^", "**")
    try:
        tree = ast.parse(text, mode="eval").body
    except SyntaxError as exc:
        raise SpecError(f"cannot parse expression {source!r}: {exc.msg}") from None
    names: set[str] = set()
    _validate(tree, source, names)
    return Expression(source, tree, frozenset(names))


def _validate(node: ast.AST, source: str, names: set[str]) -> None:
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _validate(node.left, source, names)
        _validate(node.right, source, names)
    elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        _validate(node.operand, source, names)
    elif isinstance(node, ast.Name):
        names.add(node.id)
    elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        pass
    else:
        raise SpecError(f"unsupported construct {type(node).__name__} in expression {source!r}")


def _eval(node: ast.AST, env: Mapping[str, object]):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNOPS[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Name):
        try:
            return env[node.id]
        except KeyError:
            raise SpecError(f"unbound name {node.id!r}") from None
    return float(node.value)


def evaluate(source: str, env: Mapping[str, object]) -> np.ndarray:
    with np.errstate(all="ignore"):
        return np.asarray(parse_expression(source)(env), dtype=float)
