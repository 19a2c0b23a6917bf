"""Feedback trading strategies as vectorized fields on the state space."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class StrategyField:
    """A feedback map theta(z) in R^d, z = (x, y) in R^(d+m).

    fn is vectorized: points of shape (..., d+m) map to positions (..., d).
    `coefficients` carries closed-form metadata (e.g. linear coefficients)
    so reports can state what is being traded without re-deriving it.
    """

    fn: Callable
    name: str
    d: int
    family: str = ""
    coefficients: dict = field(default_factory=dict)
    gradient_form: bool = True

    def __call__(self, z):
        return self.fn(np.asarray(z, dtype=float))


def linear_strategy(G, name: str, family: str = "", **extra) -> StrategyField:
    """theta(z) = G z with G of shape (d, d+m)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    d = G.shape[0]

    def fn(z):
        return z @ G.T

    coeff = {"matrix": G.tolist()}
    coeff.update(extra)
    return StrategyField(fn=fn, name=name, d=d, family=family,
                         coefficients=coeff, gradient_form=True)


def scalar_strategy(fn_scalar, name: str, family: str = "", **extra) -> StrategyField:
    """Wrap a scalar map (x, y) -> theta for d = m = 1 state spaces."""

    def fn(z):
        out = np.asarray(fn_scalar(z[..., 0], z[..., 1]), dtype=float)
        return out[..., None]

    return StrategyField(fn=fn, name=name, d=1, family=family,
                         coefficients=dict(extra), gradient_form=True)


def zero_strategy(d: int, dim: int) -> StrategyField:
    def fn(z):
        return np.zeros(z.shape[:-1] + (d,))

    return StrategyField(fn=fn, name="zero", d=d, coefficients={}, gradient_form=True)
