import functools
import logging

import click
import numpy as np
import sympy
import typer
from typer.core import TyperGroup

from koopman.basis.monomials import MonomialBasis
from koopman.errors import AnalyticEDMDError, InvalidArgumentError

# typer releases that vendor click raise their own UsageError class
USAGE_ERRORS = tuple({click.UsageError,
                      getattr(getattr(getattr(typer.core, "_click", click), "exceptions", click.exceptions),
                              "UsageError", click.UsageError)})


class UsageExitGroup(TyperGroup):
    """Command group whose usage errors (unknown flags, malformed values) exit with code 1.

    Exit code 2 stays reserved for a diverging simulation.
    """

    def parse_args(self, ctx, args):
        try:
            return super().parse_args(ctx, args)
        except USAGE_ERRORS as e:
            e.exit_code = 1
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except USAGE_ERRORS as e:
            e.exit_code = 1
            raise


def exits_on_error(command):
    """Turn library errors into a logged message and the matching process exit code."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except AnalyticEDMDError as e:
            logging.error(f"{type(e).__name__}: {e}")
            typer.echo(f"error: {e}", err=True)
            raise typer.Exit(code=e.exit_code)
    return wrapper


def parse_grid(specs: list[str], n: int) -> np.ndarray:
    """Tensor grid from per-axis 'low,high,count' specs; one spec is reused for every axis.

    Returns
    -------
    points: np.ndarray
        (count₁·...·countₙ) x n points, first axis varying slowest
    """
    if not specs:
        raise InvalidArgumentError("A grid needs at least one 'low,high,count' axis")
    if len(specs) == 1:
        specs = list(specs) * n
    if len(specs) != n:
        raise InvalidArgumentError(f"Grid has {len(specs)} axes, expected {n}")
    axes = []
    for spec in specs:
        parts = spec.split(",")
        try:
            low, high, count = float(parts[0]), float(parts[1]), int(parts[2])
        except (ValueError, IndexError) as e:
            raise InvalidArgumentError(f"Invalid grid axis '{spec}', expected low,high,count") from e
        if len(parts) != 3 or count < 1 or low > high:
            raise InvalidArgumentError(f"Invalid grid axis '{spec}', expected low <= high and count >= 1")
        axes.append(np.linspace(low, high, count))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([axis.reshape(-1) for axis in mesh], axis=1)


def state_symbols(n: int) -> list[sympy.Symbol]:
    return list(sympy.symbols(f"x1:{n + 1}", real=True))


def parse_function(text: str, n: int) -> sympy.Expr:
    """Parse an expression in x1..xn, e.g. 'log(1 + x1)'."""
    symbols = state_symbols(n)
    try:
        expression = sympy.sympify(text, locals={str(s): s for s in symbols})
    except (sympy.SympifyError, TypeError) as e:
        raise InvalidArgumentError(f"Cannot parse function '{text}': {e}") from e
    unknown = expression.free_symbols - set(symbols)
    if unknown:
        raise InvalidArgumentError(f"Function '{text}' uses unknown symbols {sorted(map(str, unknown))}; use x1..x{n}")
    return expression


def vectorize(expression: sympy.Expr, n: int):
    """Numpy callable on an (M, n) array."""
    function = sympy.lambdify(state_symbols(n), expression, "numpy")

    def evaluate(points: np.ndarray) -> np.ndarray:
        values = function(*[points[:, i] for i in range(n)])
        return np.broadcast_to(np.asarray(values, dtype=float), (points.shape[0],)).copy()
    return evaluate


def exact_taylor_coefficients(expression: sympy.Expr, basis: MonomialBasis, center) -> np.ndarray:
    """Exact coefficients of f in the weighted basis at x*: ∂^α f(x*) / (α! β_α)."""
    symbols = state_symbols(basis.dimension)
    point = dict(zip(symbols, np.asarray(center, dtype=float).reshape(-1)))
    coefficients = []
    for index, weight in zip(basis.indices, basis.weights):
        derivative = expression
        for symbol, power in zip(symbols, index.exponents):
            if power:
                derivative = sympy.diff(derivative, symbol, power)
        value = complex(sympy.N(derivative.subs(point)))
        coefficients.append(value.real / index.factorial() / weight)
    return np.array(coefficients)
