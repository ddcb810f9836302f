########################
# Formula Validation   #
########################

import ast
from typing import Any, Callable, Dict, Iterable, Mapping

import numpy as np

from app.exceptions import ConfigurationError, ValidationError
from app.grid import Domain
from app.model import SGProblem


def _sech(z):
    return 1.0 / np.cosh(z)


FUNCTIONS: Dict[str, Callable] = {
    'sin': np.sin,
    'cos': np.cos,
    'tan': np.tan,
    'arctan': np.arctan,
    'atan': np.arctan,
    'exp': np.exp,
    'log': np.log,
    'sqrt': np.sqrt,
    'sinh': np.sinh,
    'cosh': np.cosh,
    'tanh': np.tanh,
    'sech': _sech,
    'abs': np.abs,
}

CONSTANTS: Dict[str, float] = {'pi': np.pi, 'e': np.e}

_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)

PROBLEM_KEYS = ('domain', 'phi', 'u0', 'v0', 'exact', 'name')


def _check_tree(tree: ast.AST, variables: Iterable[str], text: str) -> None:
    names = set(variables)
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ConfigurationError(
                f"Unsupported syntax {type(node).__name__} in expression: {text}"
            )
        if isinstance(node, ast.Constant) and (
            isinstance(node.value, bool) or not isinstance(node.value, (int, float))
        ):
            raise ConfigurationError(f"Only numeric literals are allowed: {text}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ConfigurationError(f"Unknown function in expression: {text}")
            if node.keywords:
                raise ConfigurationError(f"Keyword arguments are not allowed: {text}")
            if len(node.args) != 1:
                raise ConfigurationError(f"Functions take exactly one argument: {text}")
        if isinstance(node, ast.Name) and node.id not in names | set(FUNCTIONS) | set(CONSTANTS):
            raise ConfigurationError(f"Unknown name '{node.id}' in expression: {text}")
        if isinstance(node, ast.Name) and node.id in FUNCTIONS and not _is_callee(tree, node):
            raise ConfigurationError(f"Function '{node.id}' used as a value: {text}")


def _is_callee(tree: ast.AST, name: ast.Name) -> bool:
    return any(isinstance(n, ast.Call) and n.func is name for n in ast.walk(tree))


class _FloatLiterals(ast.NodeTransformer):
    """Rewrite integer literals as floats so powers overflow instead of growing without bound."""

    def visit_Constant(self, node: ast.Constant) -> ast.Constant:
        return ast.copy_location(ast.Constant(float(node.value)), node)


def compile_expression(text: Any, variables: Iterable[str] = ('x', 'y')) -> Callable[..., np.ndarray]:
    """
    Compile a formula into a numpy-vectorised function of the given variables.

    Args:
        text (Any): Formula such as "4*atan(exp(3 - sqrt(x**2 + y**2)))", or a number.
        variables (Iterable[str]): Positional argument names of the result.

    Returns:
        Callable[..., np.ndarray]: f(*variables).

    Raises:
        ConfigurationError: If the formula is not a plain arithmetic expression
            over the allowed names and functions.
    """
    variables = tuple(variables)
    if isinstance(text, bool) or not isinstance(text, (str, int, float)):
        raise ConfigurationError(f"Expression must be a string or a number, got {text!r}")
    source = str(text).strip()
    try:
        tree = ast.parse(source, mode='eval')
    except SyntaxError as e:
        raise ConfigurationError(f"Invalid expression: {source}") from e
    _check_tree(tree, variables, source)
    try:
        tree = ast.fix_missing_locations(_FloatLiterals().visit(tree))
    except OverflowError as e:
        raise ConfigurationError(f"Numeric literal out of range: {source}") from e
    code = compile(tree, '<expression>', 'eval')

    def evaluate(*args):
        scope = dict(CONSTANTS)
        scope.update(FUNCTIONS)
        scope.update(zip(variables, args))
        try:
            return eval(code, {'__builtins__': {}}, scope)  # noqa: S307
        except ArithmeticError as e:
            raise ConfigurationError(f"Expression cannot be evaluated: {source} ({e})") from e

    evaluate.__doc__ = source
    return evaluate


def _check_evaluates(fn: Callable, args: Iterable[float], label: str) -> None:
    with np.errstate(all='ignore'):
        try:
            fn(*(np.float64(a) for a in args))
        except ConfigurationError as e:
            raise ConfigurationError(f"{label}: {e}", key='case') from e


def problem_from_spec(spec: Mapping[str, Any]) -> SGProblem:
    """
    Build a problem from an inline mapping of formulas.

    Keys: domain [a, b, c, d] (required), u0 (required), phi (default "1"),
    v0 (default "0"), exact in x, y, t (optional), name (optional).

    Raises:
        ConfigurationError: On unknown keys, a missing key or a bad formula or domain.
    """
    if not isinstance(spec, Mapping):
        raise ConfigurationError("Inline problem must be a JSON object", key='case')
    unknown = sorted(set(spec) - set(PROBLEM_KEYS))
    if unknown:
        raise ConfigurationError(f"Unknown problem keys: {', '.join(unknown)}", key='case')
    for required in ('domain', 'u0'):
        if required not in spec:
            raise ConfigurationError(f"Inline problem needs '{required}'", key='case')

    bounds = spec['domain']
    if not isinstance(bounds, (list, tuple)) or len(bounds) != 4:
        raise ConfigurationError("domain must be a list [a, b, c, d]", key='case')
    try:
        domain = Domain(*(float(v) for v in bounds))
    except (TypeError, ValueError, ValidationError) as e:
        raise ConfigurationError(f"Invalid domain {bounds!r}: {e}", key='case') from e

    corner = (domain.a, domain.c)
    phi = compile_expression(spec.get('phi', '1'))
    init_u = compile_expression(spec['u0'])
    init_v = compile_expression(spec.get('v0', '0'))
    for label, fn in (('phi', phi), ('u0', init_u), ('v0', init_v)):
        _check_evaluates(fn, corner, label)
    exact = None
    if spec.get('exact') is not None:
        exact = compile_expression(spec['exact'], ('x', 'y', 't'))
        _check_evaluates(exact, corner + (0.0,), 'exact')
    return SGProblem(
        domain=domain,
        phi=phi,
        init_u=init_u,
        init_v=init_v,
        exact=exact,
        name=str(spec.get('name', 'inline')),
    )
