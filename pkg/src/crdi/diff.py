"""Coordinate derivatives of point functions.

Every field in the library is a pure ``jnp`` function of a coordinate 4-vector.
Two interchangeable derivative routes exist: ``"analytic"`` uses forward-mode
automatic differentiation (exact up to rounding), ``"fd"`` uses second-order
central differences with a relative step. Running both on the same quantity
is the basic self-check of the package.
"""

from __future__ import annotations

from typing import Callable

from ._backend import jax, jnp

MODES = ("analytic", "fd")
DEFAULT_STEP = 1e-5


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"derivative mode must be one of {MODES}, got {mode!r}")
    return mode


def fd_steps(x, step: float = DEFAULT_STEP):
    """Per-coordinate step ``step * max(1, |x|)``, rounded to a representable increment."""
    h = step * jnp.maximum(1.0, jnp.abs(x))
    return (x + h) - x


def jacobian(f: Callable, x, mode: str = "analytic", step: float = DEFAULT_STEP):
    """Derivative of ``f`` at ``x`` with the coordinate index as the trailing axis.

    ``f`` maps a real vector of shape (n,) to an array of any shape and dtype;
    the result has shape ``f(x).shape + (n,)``.
    """
    check_mode(mode)
    x = jnp.asarray(x, dtype=jnp.float64)
    if mode == "analytic":
        return jax.jacfwd(f)(x)
    h = fd_steps(x, step)
    shifts = jnp.diag(h)
    fp = jax.vmap(f)(x + shifts)
    fm = jax.vmap(f)(x - shifts)
    d = (fp - fm) / (2.0 * h.reshape((-1,) + (1,) * (fp.ndim - 1)))
    return jnp.moveaxis(d, 0, -1)


def derivative_fn(f: Callable, mode: str = "analytic", step: float = DEFAULT_STEP) -> Callable:
    """Return ``x -> jacobian(f, x)`` so derivative routes can be nested."""
    check_mode(mode)
    return lambda x: jacobian(f, x, mode, step)
