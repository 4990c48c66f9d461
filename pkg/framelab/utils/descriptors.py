"""
Parser for the descriptor strings used in experiment configs.

Descriptors are small call expressions such as ``uniform(0, 1)``,
``jitter(1, 0.4, seed=7)``, ``union(lattice(1, 0), lattice(1, 0, offset=1/3))``
or ``ifs(lambda=0.5, digits=[0, 0.5])``. They are parsed with :mod:`ast` and
only literals, lists, arithmetic on numbers and nested calls are accepted;
nothing is ever evaluated as Python.
"""

import ast
import logging
import operator
import re
from dataclasses import dataclass, field

from framelab.errors import DescriptorError

logger = logging.getLogger(__name__)

_BIN_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}

# "lambda" is a Python keyword, rename it before parsing
_LAMBDA_KW = re.compile(r"\blambda\s*=")
# grid(path) and csv(path) may carry an unquoted path
_PATH_CALL = re.compile(r"^\s*(grid|csv)\(\s*([^'\"].*?)\s*\)\s*$")


@dataclass(frozen=True)
class Descriptor:
    """A parsed descriptor: a name, positional arguments and keyword arguments."""

    name: str
    args: tuple = ()
    kwargs: dict = field(default_factory=dict)
    text: str = ""

    def arg(self, index: int, keyword: str, default=None):
        """Positional argument ``index`` or keyword ``keyword``, else ``default``."""
        if keyword in self.kwargs:
            return self.kwargs[keyword]
        if index < len(self.args):
            return self.args[index]
        return default

    def __str__(self):
        return self.text or self.name


def parse_descriptor(text: str) -> Descriptor:
    """
    Parse a descriptor string.

    Args:
        text (str): descriptor, e.g. ``"uniform(0,1)"`` or ``"triangle"``.

    Returns:
        Descriptor

    Raises:
        DescriptorError: for empty text, syntax errors or unsupported expressions.

    Example:
        >>> parse_descriptor("jitter(1, 0.4, seed=7)").kwargs
        {'seed': 7}
    """
    if not isinstance(text, str) or not text.strip():
        raise DescriptorError("Empty descriptor")
    source = text.strip()
    match = _PATH_CALL.match(source)
    if match:
        source = f"{match.group(1)}({match.group(2)!r})"
    source = _LAMBDA_KW.sub("lam=", source)

    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as e:
        raise DescriptorError(f"Cannot parse descriptor '{text}': {e.msg}") from e

    node = tree.body
    if isinstance(node, ast.Name):
        return Descriptor(node.id, (), {}, text.strip())
    if not isinstance(node, ast.Call):
        raise DescriptorError(f"Descriptor '{text}' is not a call like name(...)")
    descriptor = _call(node, text)
    return Descriptor(descriptor.name, descriptor.args, descriptor.kwargs, text.strip())


def _call(node: ast.Call, text: str) -> Descriptor:
    if not isinstance(node.func, ast.Name):
        raise DescriptorError(f"Unsupported callee in '{text}'")
    args = tuple(_value(a, text) for a in node.args)
    kwargs = {}
    for kw in node.keywords:
        if kw.arg is None:
            raise DescriptorError(f"Unsupported **kwargs in '{text}'")
        kwargs[kw.arg] = _value(kw.value, text)
    return Descriptor(node.func.id, args, kwargs, ast.unparse(node))


def _value(node, text: str):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, str)):
        return node.value
    if isinstance(node, (ast.List, ast.Tuple)):
        return [_value(e, text) for e in node.elts]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        value = _value(node.operand, text)
        if not isinstance(value, (int, float)):
            raise DescriptorError(f"Unary sign on a non-number in '{text}'")
        return -value if isinstance(node.op, ast.USub) else value
    if isinstance(node, ast.BinOp) and type(node.op) in _BIN_OPS:
        left, right = _value(node.left, text), _value(node.right, text)
        if not all(isinstance(v, (int, float)) for v in (left, right)):
            raise DescriptorError(f"Arithmetic on non-numbers in '{text}'")
        try:
            return _BIN_OPS[type(node.op)](left, right)
        except ZeroDivisionError as e:
            raise DescriptorError(f"Division by zero in '{text}'") from e
    if isinstance(node, ast.Call):
        return _call(node, text)
    if isinstance(node, ast.Name):
        return Descriptor(node.id, (), {}, node.id)
    raise DescriptorError(f"Unsupported expression {ast.unparse(node)!r} in '{text}'")


def as_float(value, what: str) -> float:
    """Coerce a parsed argument to float or raise DescriptorError naming ``what``."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DescriptorError(f"{what} must be a number, got {value!r}")
    return float(value)


def as_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DescriptorError(f"{what} must be an integer, got {value!r}")
    return value
