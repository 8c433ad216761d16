"""A small, safe expression language for componentwise map formulas.

Expressions use the variables ``x0 .. x{d-1}`` (coordinates of the input
point), numeric literals, ``+ - * / **``, parentheses, the constants ``pi``
and ``e`` and the functions listed in :data:`FUNCTIONS`.  Anything else is
rejected at compile time.
"""

from __future__ import annotations

import ast
import re
from functools import reduce

import numpy as np

FUNCTIONS = {
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "min": lambda *a: reduce(np.minimum, a),
    "max": lambda *a: reduce(np.maximum, a),
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_VAR = re.compile(r"^x(\d+)$")
_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def _check(tree: ast.AST, dim: int, source: str):
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ValueError(f"unsupported syntax {type(node).__name__} in {source!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError(f"only numeric literals are allowed in {source!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
                raise ValueError(f"unknown function call in {source!r}")
        if isinstance(node, ast.Name) and node.id not in FUNCTIONS and node.id not in CONSTANTS:
            m = _VAR.match(node.id)
            if not m:
                raise ValueError(f"unknown name {node.id!r} in {source!r}")
            if int(m.group(1)) >= dim:
                raise ValueError(f"variable {node.id} out of range for dimension {dim}")


def compile_expr(source: str, dim: int):
    """Compile ``source`` into ``f(X) -> column`` for ``X`` of shape ``(m, dim)``."""
    tree = ast.parse(source.strip(), mode="eval")
    _check(tree, dim, source)
    code = compile(tree, "<expr>", "eval")

    def evaluate(X):
        env = {"__builtins__": {}}
        env.update(FUNCTIONS)
        env.update(CONSTANTS)
        env.update({f"x{i}": X[:, i] for i in range(dim)})
        value = eval(code, env)  # names and node types whitelisted above
        return np.broadcast_to(np.asarray(value, dtype=float), (X.shape[0],))

    return evaluate
