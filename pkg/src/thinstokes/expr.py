"""Parse expression strings in ``x`` into differentiable function graphs.

Grammar: numeric literals, ``x``, ``pi``, ``+ - * / ^ **``, unary minus and
the functions ``sin cos exp log sqrt`` plus ``smoothstep(a, b, arg)``.
Python's own parser does the tokenizing; only whitelisted nodes are accepted.
"""

from __future__ import annotations

import ast
import math

from . import smooth as sm

_FUNCS = {"sin": sm.sin, "cos": sm.cos, "exp": sm.exp, "log": sm.log, "sqrt": sm.sqrt}
_NAMES = {"pi": math.pi, "e": math.e}


class ExpressionError(ValueError):
    pass


def _number(node):
    val = _walk(node)
    if not isinstance(val, sm.Constant):
        raise ExpressionError("smoothstep bounds must be constants")
    return val.value


def _walk(node):
    if isinstance(node, ast.Expression):
        return _walk(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return sm.Constant(float(node.value))
    if isinstance(node, ast.Name):
        if node.id == "x":
            return sm.X
        if node.id in _NAMES:
            return sm.Constant(_NAMES[node.id])
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _walk(node.operand)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp):
        a, b = _walk(node.left), _walk(node.right)
        op = node.op
        if isinstance(op, ast.Add):
            return a + b
        if isinstance(op, ast.Sub):
            return a - b
        if isinstance(op, ast.Mult):
            return a * b
        if isinstance(op, ast.Div):
            return a / b
        if isinstance(op, ast.Pow):
            return a ** b
        raise ExpressionError(f"operator {type(op).__name__} not supported")
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        if node.keywords:
            raise ExpressionError("keyword arguments not supported")
        if name == "smoothstep":
            if len(node.args) != 3:
                raise ExpressionError("smoothstep takes (a, b, arg)")
            a, b = _number(node.args[0]), _number(node.args[1])
            return sm.smoothstep(a, b, _walk(node.args[2]))
        if name in _FUNCS:
            if len(node.args) != 1:
                raise ExpressionError(f"{name} takes one argument")
            return _FUNCS[name](_walk(node.args[0]))
        raise ExpressionError(f"unknown function {name!r}")
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse(text: str) -> sm.SmoothFunction1D:
    """Compile ``text`` (a formula in ``x``) to a :class:`SmoothFunction1D`."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    return _walk(tree)
