"""Sparse polynomials in R^4 as {exponent tuple: coefficient} dicts."""
from __future__ import annotations

import itertools

import numpy as np


def clean(c: dict) -> dict:
    return {e: float(v) for e, v in c.items() if v != 0}


def diff(c: dict, axis: int) -> dict:
    out = {}
    for e, v in c.items():
        if e[axis] > 0:
            f = list(e)
            f[axis] -= 1
            out[tuple(f)] = out.get(tuple(f), 0.0) + v * e[axis]
    return clean(out)


def add(a: dict, b: dict, scale: float = 1.0) -> dict:
    out = dict(a)
    for e, v in b.items():
        out[e] = out.get(e, 0.0) + scale * v
    return clean(out)


def laplacian(c: dict, dim: int = 4) -> dict:
    out = {}
    for ax in range(dim):
        out = add(out, diff(diff(c, ax), ax))
    return out


def evaluate(c: dict, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, float))
    out = np.zeros(len(X))
    for e, v in c.items():
        term = np.full(len(X), v)
        for ax, p in enumerate(e):
            if p:
                term = term * X[:, ax] ** p
        out += term
    return out


def exponents(dim: int, degree: int):
    """All exponent tuples of total degree <= ``degree``."""
    return [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree]


def random_biharmonic(rng: np.random.Generator, scale: float = 1.0) -> dict:
    """Random polynomial of degree <= 4 in R^4 with Delta^2 = 0.

    Delta^2 of a quartic is a constant, so subtracting the right multiple of
    |X|^4 (Delta^2 |X|^4 = 192) makes any quartic biharmonic.
    """
    c = {e: scale * rng.standard_normal() for e in exponents(4, 4)}
    bi = laplacian(laplacian(c)).get((0, 0, 0, 0), 0.0)
    r4 = {}
    for i in range(4):
        for j in range(4):
            e = [0] * 4
            e[i] += 2
            e[j] += 2
            r4[tuple(e)] = r4.get(tuple(e), 0.0) + 1.0
    return add(c, r4, -bi / 192.0)


class Poly4:
    """Callable polynomial on (M, 4) points with an exact Laplacian."""

    def __init__(self, coefficients: dict):
        self.coefficients = clean(coefficients)

    def __call__(self, X):
        return evaluate(self.coefficients, X)

    def laplacian(self, X):
        return evaluate(laplacian(self.coefficients), X)

    def bilaplacian(self) -> dict:
        return laplacian(laplacian(self.coefficients))
