"""User-supplied immersions from declarative files.

A manifold file is a YAML mapping with closed-form component expressions in a
minimal grammar: the binary operators ``+ - * / **``, unary minus, numeric
literals, the parameter names, and calls to ``sin, cos, sinh, cosh, exp,
pow``.  Components are validated against that whitelist and compiled once;
derivatives are always numeric (the grammar is deliberately too small to be
worth differentiating symbolically).

Example::

    name: wavy_cylinder
    space: euclidean        # euclidean | sphere | hyperbolic
    dim: 3                  # intrinsic dimension of the ambient space form
    params: [t, z]
    components: ["cos(t)", "sin(t)", "z + 0.1*sin(t)"]
    eval_box: [[-3.1416, -2.0], [3.1416, 2.0]]
    periods: [6.2832, null]     # optional
"""

from __future__ import annotations

import ast
import math

import numpy as np
import yaml

from nullity_lab import ambient
from nullity_lab.immersions import Box, ChartedImmersion


class ExpressionError(ValueError):
    """Expression outside the supported grammar."""


_ALLOWED_CALLS = {"sin": math.sin, "cos": math.cos, "sinh": math.sinh,
                  "cosh": math.cosh, "exp": math.exp, "pow": math.pow}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.USub, ast.UAdd)


def _validate_node(node: ast.AST, params: set) -> None:
    if isinstance(node, ast.Expression):
        _validate_node(node.body, params)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _validate_node(node.left, params)
        _validate_node(node.right, params)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _ALLOWED_UNARY):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _validate_node(node.operand, params)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_CALLS:
            raise ExpressionError("only sin, cos, sinh, cosh, exp, pow may be called")
        if node.keywords:
            raise ExpressionError("keyword arguments not allowed")
        for arg in node.args:
            _validate_node(arg, params)
    elif isinstance(node, ast.Name):
        if node.id not in params:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError("only numeric literals allowed")
    else:
        raise ExpressionError(f"syntax {type(node).__name__} not allowed")


def compile_component(expr: str, params: list):
    """Compile one component expression to a float-valued function of u."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {expr!r}: {exc}") from exc
    _validate_node(tree, set(params))
    code = compile(tree, filename=f"<component {expr!r}>", mode="eval")
    env = dict(_ALLOWED_CALLS)

    def fn(u):
        scope = dict(zip(params, (float(x) for x in u)))
        return float(eval(code, {"__builtins__": {}}, {**env, **scope}))

    return fn


_SPACES = {"euclidean": ambient.euclidean, "sphere": ambient.sphere,
           "hyperbolic": ambient.hyperbolic}


def immersion_from_dict(spec: dict) -> ChartedImmersion:
    for key in ("name", "space", "dim", "params", "components", "eval_box"):
        if key not in spec:
            raise ExpressionError(f"manifold file missing key {key!r}")
    space_kind = spec["space"]
    if space_kind not in _SPACES:
        raise ExpressionError(f"unknown space {space_kind!r}")
    space = _SPACES[space_kind](int(spec["dim"]))
    params = [str(p) for p in spec["params"]]
    comps = [compile_component(str(c), params) for c in spec["components"]]
    if len(comps) != space.embed_dim:
        raise ExpressionError(
            f"expected {space.embed_dim} components for {space_kind} of dim "
            f"{space.dim}, got {len(comps)}")
    lo, hi = spec["eval_box"]
    eval_box = Box(tuple(float(x) for x in lo), tuple(float(x) for x in hi))
    periods = spec.get("periods")
    if periods is not None:
        periods = tuple(None if p is None else float(p) for p in periods)

    def value(u):
        return np.array([c(u) for c in comps])

    imm = ChartedImmersion(
        name=str(spec["name"]), space=space, param_dim=len(params),
        value=value, eval_box=eval_box, periods=periods,
        incomplete=bool(spec.get("incomplete", False)),
    )
    imm.validate(points=eval_box.sample(np.random.default_rng(1), 10), tol=1e-8)
    return imm


def load_immersion(path) -> ChartedImmersion:
    with open(path, "r", encoding="utf-8") as fh:
        spec = yaml.safe_load(fh)
    if not isinstance(spec, dict):
        raise ExpressionError("manifold file must be a YAML mapping")
    return immersion_from_dict(spec)
