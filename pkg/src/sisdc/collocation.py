"""Collocation node sets and quadrature weight matrices.

Nodes live on the unit interval with tau_M = 1. Radau-right rules exclude the
left endpoint, Lobatto rules include both endpoints. The incremental weights
integrate the Lagrange basis over each subinterval [tau_{m-1}, tau_m] (with
tau_0 := 0), the zero-to-node weights accumulate them from the slab start.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

NodeKind = Literal["radau_right", "lobatto", "equidistant"]

_ROOT_TOL = 1e-15


def _legendre(n: int, x: float) -> float:
    """P_n(x) by the three-term recurrence."""
    if n == 0:
        return 1.0
    pm, p = 1.0, x
    for k in range(1, n):
        pm, p = p, ((2 * k + 1) * x * p - k * pm) / (k + 1)
    return p


def _legendre_deriv(n: int, x: float) -> float:
    # (1-x^2) P_n' = n (P_{n-1} - x P_n); endpoints via the known limit
    if abs(x) == 1.0:
        return 0.5 * n * (n + 1) * x ** (n + 1)
    return n * (_legendre(n - 1, x) - x * _legendre(n, x)) / (1.0 - x * x)


def _legendre_deriv2(n: int, x: float) -> float:
    # from the Legendre ODE: (1-x^2) P'' = 2x P' - n(n+1) P
    return (2.0 * x * _legendre_deriv(n, x) - n * (n + 1) * _legendre(n, x)) / (
        1.0 - x * x
    )


def _refine_roots(f, df, brackets):
    """Bisection to a tight bracket, then Newton polish."""
    roots = []
    for a, b in brackets:
        fa = f(a)
        for _ in range(80):
            c = 0.5 * (a + b)
            fc = f(c)
            if fa * fc <= 0.0:
                b = c
            else:
                a, fa = c, fc
        x = 0.5 * (a + b)
        for _ in range(8):
            fx = f(x)
            d = df(x)
            if d == 0.0:
                break
            step = fx / d
            x -= step
            if abs(step) < _ROOT_TOL:
                break
        roots.append(x)
    return roots


def _sign_change_brackets(f, lo, hi, n_samples):
    xs = np.linspace(lo, hi, n_samples)
    vals = [f(x) for x in xs]
    out = []
    for i in range(n_samples - 1):
        if vals[i] == 0.0:
            out.append((xs[i] - 1e-12, xs[i] + 1e-12))
        elif vals[i] * vals[i + 1] < 0.0:
            out.append((xs[i], xs[i + 1]))
    return out


@dataclass(frozen=True)
class CollocationRule:
    """A node family on (0, 1] with tau_M = 1."""

    kind: NodeKind
    M: int
    tau: np.ndarray
    includes_left: bool

    def __post_init__(self):
        tau = self.tau
        if len(tau) != self.M:
            raise ValueError("node count mismatch")
        if not np.all(np.diff(tau) > 0):
            raise ValueError("nodes must be strictly increasing")
        if abs(tau[-1] - 1.0) > 1e-14:
            raise ValueError("last node must be 1")


@dataclass(frozen=True)
class QuadratureWeights:
    """Incremental (node-to-node) and zero-to-node weight matrices."""

    w_nn: np.ndarray
    w_0n: np.ndarray


def make_nodes(kind: NodeKind, M: int) -> CollocationRule:
    """Construct a collocation rule on the unit interval.

    radau_right: roots of P_M(2t-1) - P_{M-1}(2t-1), right endpoint included.
    lobatto: endpoints plus the roots of P'_{M-1}(2t-1).
    equidistant: m/M for m = 1..M (no left endpoint).
    """
    if M < 1:
        raise ValueError("M must be positive")
    if kind == "radau_right":
        if M == 1:
            tau = np.array([1.0])
        else:
            f = lambda x: _legendre(M, x) - _legendre(M - 1, x)
            df = lambda x: _legendre_deriv(M, x) - _legendre_deriv(M - 1, x)
            # M-1 interior roots in (-1, 1); x = 1 is a root by construction
            brackets = _sign_change_brackets(f, -1.0 + 1e-9, 1.0 - 1e-6, 200 * M)
            interior = _refine_roots(f, df, brackets)
            if len(interior) != M - 1:
                raise RuntimeError("root bracketing failed for radau_right")
            tau = np.array([(x + 1.0) / 2.0 for x in interior] + [1.0])
        return CollocationRule("radau_right", M, tau, includes_left=False)
    if kind == "lobatto":
        if M < 2:
            raise ValueError("lobatto needs M >= 2")
        n = M - 1
        f = lambda x: _legendre_deriv(n, x)
        df = lambda x: _legendre_deriv2(n, x)
        brackets = _sign_change_brackets(f, -1.0 + 1e-9, 1.0 - 1e-9, 200 * M)
        interior = _refine_roots(f, df, brackets)
        if len(interior) != M - 2:
            raise RuntimeError("root bracketing failed for lobatto")
        tau = np.array([0.0] + [(x + 1.0) / 2.0 for x in interior] + [1.0])
        return CollocationRule("lobatto", M, tau, includes_left=True)
    if kind == "equidistant":
        tau = np.arange(1, M + 1) / M
        return CollocationRule("equidistant", M, tau, includes_left=False)
    raise ValueError(f"unknown node kind {kind!r}")


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    f = lambda x: _legendre(n, x)
    df = lambda x: _legendre_deriv(n, x)
    brackets = _sign_change_brackets(f, -1.0 + 1e-9, 1.0 - 1e-9, 200 * n + 200)
    roots = _refine_roots(f, df, brackets)
    if len(roots) != n:
        raise RuntimeError("root bracketing failed for gauss_legendre")
    x = np.array(roots)
    w = 2.0 / ((1.0 - x * x) * np.array([df(r) for r in roots]) ** 2)
    return x, w


def gauss_lobatto(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lobatto-Legendre nodes and weights on [-1, 1], n >= 2 points."""
    x = 2.0 * make_nodes("lobatto", n).tau - 1.0
    w = 2.0 / (n * (n - 1) * np.array([_legendre(n - 1, xi) for xi in x]) ** 2)
    return x, w


def lagrange_matrix(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """A[i, j] = ell_j(dst[i]) for the Lagrange basis on the src nodes."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    A = np.empty((len(dst), len(src)))
    for j in range(len(src)):
        others = np.delete(src, j)
        A[:, j] = np.prod(
            (dst[:, None] - others[None, :]) / (src[j] - others[None, :]), axis=1
        )
    return A


def lagrange_eval(rule: CollocationRule, i: int, t: float) -> float:
    """Value of the i-th (1-based) Lagrange basis polynomial at t."""
    if not 1 <= i <= rule.M:
        raise ValueError("basis index out of range")
    return float(lagrange_matrix(rule.tau, np.array([t]))[0, i - 1])


def compute_nn_weights(rule: CollocationRule) -> np.ndarray:
    """w_nn[m, i] = integral of ell_i over [tau_{m-1}, tau_m], tau_0 = 0.

    The subinterval integrals use Gauss-Legendre quadrature exact well beyond
    the degree M-1 integrands.
    """
    M = rule.M
    gx, gw = gauss_legendre(M + 2)
    edges = np.concatenate(([0.0], rule.tau))
    w = np.zeros((M, M))
    for m in range(M):
        a, b = edges[m], edges[m + 1]
        if b - a == 0.0:
            continue
        pts = 0.5 * (b - a) * gx + 0.5 * (a + b)
        L = lagrange_matrix(rule.tau, pts)
        w[m] = 0.5 * (b - a) * gw @ L
    return w


def compute_0n_weights(w_nn: np.ndarray) -> np.ndarray:
    """Zero-to-node weights: cumulative partial row sums of w_nn."""
    return np.cumsum(np.asarray(w_nn, dtype=float), axis=0)


def make_weights(rule: CollocationRule) -> QuadratureWeights:
    w_nn = compute_nn_weights(rule)
    return QuadratureWeights(w_nn=w_nn, w_0n=compute_0n_weights(w_nn))
