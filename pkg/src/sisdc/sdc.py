"""Deferred correction sweeps on a single time slab.

A sweep refines all M node values of one slab using the quadrature of the
previous iterate plus a substep correction. Two algebraically equivalent
arrangements are provided for the single-level method: the incremental form
marches node to node, the non-incremental form measures every node from the
slab start and accumulates the substep differences. Their iterates agree to
roundoff on one level; with multilevel corrections they genuinely differ.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .collocation import CollocationRule, QuadratureWeights
from .integrators import OperatorContext, Scheme

Form = str  # "incremental" | "nonincremental"


@dataclass
class NodalSolution:
    """State of one slab iterate: node values plus the caches a sweep needs.

    f holds the full right-hand side at every node, h1 the substep operator
    evaluated on this iterate (the term the next sweep subtracts), h2 the
    second such term used by the two-stage scheme.
    """

    u0: np.ndarray
    u: np.ndarray
    f: np.ndarray
    h1: np.ndarray
    h2: Optional[np.ndarray]
    t0: float

    def copy(self) -> "NodalSolution":
        return NodalSolution(
            self.u0.copy(),
            self.u.copy(),
            self.f.copy(),
            self.h1.copy(),
            None if self.h2 is None else self.h2.copy(),
            self.t0,
        )

    @property
    def end_value(self) -> np.ndarray:
        return self.u[-1]


def _node_times(rule: CollocationRule, dt: float, t0: float) -> np.ndarray:
    return t0 + dt * rule.tau


def _dts(rule: CollocationRule, dt: float) -> np.ndarray:
    edges = np.concatenate(([0.0], rule.tau))
    return dt * np.diff(edges)


def _alloc(u0: np.ndarray, M: int, scheme: Scheme, t0: float) -> NodalSolution:
    shape = (M,) + u0.shape
    h2 = np.zeros(shape, dtype=u0.dtype) if scheme == "si2" else None
    return NodalSolution(
        u0=u0.copy(),
        u=np.zeros(shape, dtype=u0.dtype),
        f=np.zeros(shape, dtype=u0.dtype),
        h1=np.zeros(shape, dtype=u0.dtype),
        h2=h2,
        t0=t0,
    )


def _fill_node_caches(
    ctx: OperatorContext,
    scheme: Scheme,
    sol: NodalSolution,
    m: int,
    dt_m: float,
    t_m: float,
    coeff,
    conv_prev: Optional[np.ndarray],
) -> None:
    """Recompute f/h caches at node m from the stored node values."""
    u_m = sol.u[m]
    sol.f[m] = ctx.eval_rhs(u_m, t_m)
    if dt_m == 0.0:
        sol.h1[m] = 0.0
        if sol.h2 is not None:
            sol.h2[m] = 0.0
        return
    diff_m = ctx.apply_diffusion(coeff, u_m, t_m)
    sol.h1[m] = dt_m * (conv_prev + diff_m)
    if sol.h2 is not None:
        sol.h2[m] = dt_m * (ctx.apply_convection(u_m, t_m) + diff_m)


def refresh_caches(
    ctx: OperatorContext,
    rule: CollocationRule,
    dt: float,
    scheme: Scheme,
    sol: NodalSolution,
) -> None:
    """Rebuild all caches after node values changed outside a sweep."""
    times = _node_times(rule, dt, sol.t0)
    dts = _dts(rule, dt)
    for m in range(rule.M):
        u_prev = sol.u0 if m == 0 else sol.u[m - 1]
        t_prev = sol.t0 if m == 0 else times[m - 1]
        if dts[m] == 0.0:
            _fill_node_caches(ctx, scheme, sol, m, 0.0, times[m], None, None)
            continue
        coeff = ctx.modified_diffusion_matrix(u_prev, dts[m], scheme)
        conv_prev = ctx.apply_convection(u_prev, t_prev)
        _fill_node_caches(ctx, scheme, sol, m, dts[m], times[m], coeff, conv_prev)


def predict(
    ctx: OperatorContext,
    rule: CollocationRule,
    dt: float,
    scheme: Scheme,
    u0: np.ndarray,
    t0: float,
) -> NodalSolution:
    """March the slab once with the substepper to produce the 0-th iterate."""
    sol = _alloc(np.asarray(u0), rule.M, scheme, t0)
    times = _node_times(rule, dt, t0)
    dts = _dts(rule, dt)
    for m in range(rule.M):
        u_prev = sol.u0 if m == 0 else sol.u[m - 1]
        t_prev = t0 if m == 0 else times[m - 1]
        dt_m = dts[m]
        if dt_m == 0.0:
            sol.u[m] = u_prev
            _fill_node_caches(ctx, scheme, sol, m, 0.0, times[m], None, None)
            continue
        coeff = ctx.modified_diffusion_matrix(u_prev, dt_m, scheme)
        conv_prev = ctx.apply_convection(u_prev, t_prev)
        base = u_prev + dt_m * conv_prev
        if scheme in ("euler", "si1"):
            sol.u[m] = ctx.implicit_solve(coeff, dt_m, base, times[m])
        elif scheme == "si2":
            stage = ctx.implicit_solve(coeff, dt_m, base, times[m])
            sol.u[m] = ctx.implicit_solve(
                coeff, dt_m, u_prev + dt_m * ctx.apply_convection(stage, times[m]),
                times[m],
            )
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        _fill_node_caches(ctx, scheme, sol, m, dt_m, times[m], coeff, conv_prev)
    return sol


def constant_start(
    ctx: OperatorContext,
    rule: CollocationRule,
    dt: float,
    scheme: Scheme,
    u0: np.ndarray,
    t0: float,
) -> NodalSolution:
    """Copy the slab-start state to every node (the trivial 0-th iterate)."""
    sol = _alloc(np.asarray(u0), rule.M, scheme, t0)
    sol.u[:] = sol.u0
    refresh_caches(ctx, rule, dt, scheme, sol)
    return sol


def from_nodes(
    ctx: OperatorContext,
    rule: CollocationRule,
    dt: float,
    scheme: Scheme,
    u0: np.ndarray,
    t0: float,
    u_nodes: np.ndarray,
) -> NodalSolution:
    """Wrap externally produced node values (with caches) as an iterate."""
    sol = _alloc(np.asarray(u0), rule.M, scheme, t0)
    sol.u[:] = u_nodes
    refresh_caches(ctx, rule, dt, scheme, sol)
    return sol


def sweep(
    ctx: OperatorContext,
    rule: CollocationRule,
    weights: QuadratureWeights,
    dt: float,
    scheme: Scheme,
    sol: NodalSolution,
    g: Optional[np.ndarray] = None,
    form: Form = "incremental",
) -> NodalSolution:
    """One correction sweep; returns the next iterate.

    g, when given, holds per-node offsets in the convention of the chosen
    form: node-to-node offsets for the incremental sweep, zero-to-node
    offsets for the non-incremental one.
    """
    if form == "incremental":
        return _sweep_incremental(ctx, rule, weights, dt, scheme, sol, g)
    if form == "nonincremental":
        return _sweep_nonincremental(ctx, rule, weights, dt, scheme, sol, g)
    raise ValueError(f"unknown sweep form {form!r}")


def _sweep_incremental(ctx, rule, weights, dt, scheme, sol, g):
    new = _alloc(sol.u0, rule.M, scheme, sol.t0)
    times = _node_times(rule, dt, sol.t0)
    dts = _dts(rule, dt)
    # quadrature of the previous iterate over each subinterval
    Q = dt * np.tensordot(weights.w_nn, sol.f, axes=(1, 0))
    for m in range(rule.M):
        u_prev = new.u0 if m == 0 else new.u[m - 1]
        t_prev = new.t0 if m == 0 else times[m - 1]
        q_m = Q[m] if g is None else Q[m] + g[m]
        dt_m = dts[m]
        if dt_m == 0.0:
            new.u[m] = u_prev + q_m
            _fill_node_caches(ctx, scheme, new, m, 0.0, times[m], None, None)
            continue
        coeff = ctx.modified_diffusion_matrix(u_prev, dt_m, scheme)
        conv_prev = ctx.apply_convection(u_prev, t_prev)
        if scheme in ("euler", "si1"):
            rhs = u_prev + q_m + dt_m * conv_prev - sol.h1[m]
            new.u[m] = ctx.implicit_solve(coeff, dt_m, rhs, times[m])
        elif scheme == "si2":
            stage = ctx.implicit_solve(
                coeff, dt_m, u_prev + q_m + dt_m * conv_prev - sol.h1[m], times[m]
            )
            rhs = u_prev + q_m + dt_m * ctx.apply_convection(stage, times[m]) - sol.h2[m]
            new.u[m] = ctx.implicit_solve(coeff, dt_m, rhs, times[m])
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        _fill_node_caches(ctx, scheme, new, m, dt_m, times[m], coeff, conv_prev)
    return new


def _sweep_nonincremental(ctx, rule, weights, dt, scheme, sol, g):
    new = _alloc(sol.u0, rule.M, scheme, sol.t0)
    times = _node_times(rule, dt, sol.t0)
    dts = _dts(rule, dt)
    Q0 = dt * np.tensordot(weights.w_0n, sol.f, axes=(1, 0))
    if scheme == "si2":
        # the internal stage keeps its node-to-node quadrature
        Qnn = dt * np.tensordot(weights.w_nn, sol.f, axes=(1, 0))
        g_nn = None if g is None else np.diff(g, axis=0, prepend=np.zeros_like(g[:1]))
    S = np.zeros_like(sol.u0)  # running sum of substep differences
    for m in range(rule.M):
        base = sol.u0 + Q0[m] + S if g is None else sol.u0 + Q0[m] + g[m] + S
        dt_m = dts[m]
        if dt_m == 0.0:
            new.u[m] = base
            _fill_node_caches(ctx, scheme, new, m, 0.0, times[m], None, None)
            continue
        u_prev = new.u0 if m == 0 else new.u[m - 1]
        t_prev = new.t0 if m == 0 else times[m - 1]
        coeff = ctx.modified_diffusion_matrix(u_prev, dt_m, scheme)
        conv_prev = ctx.apply_convection(u_prev, t_prev)
        if scheme in ("euler", "si1"):
            rhs = base + dt_m * conv_prev - sol.h1[m]
            new.u[m] = ctx.implicit_solve(coeff, dt_m, rhs, times[m])
            _fill_node_caches(ctx, scheme, new, m, dt_m, times[m], coeff, conv_prev)
            S = S + (new.h1[m] - sol.h1[m])
        elif scheme == "si2":
            q_stage = Qnn[m] if g_nn is None else Qnn[m] + g_nn[m]
            stage = ctx.implicit_solve(
                coeff, dt_m, u_prev + q_stage + dt_m * conv_prev - sol.h1[m], times[m]
            )
            conv_stage = ctx.apply_convection(stage, times[m])
            rhs = base + dt_m * conv_stage - sol.h2[m]
            new.u[m] = ctx.implicit_solve(coeff, dt_m, rhs, times[m])
            _fill_node_caches(ctx, scheme, new, m, dt_m, times[m], coeff, conv_prev)
            d_m = dt_m * (conv_stage + ctx.apply_diffusion(coeff, new.u[m], times[m])) - sol.h2[m]
            S = S + d_m
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
    return new


def residual(
    rule: CollocationRule,
    weights: QuadratureWeights,
    dt: float,
    sol: NodalSolution,
    g: Optional[np.ndarray] = None,
    form: Form = "incremental",
) -> np.ndarray:
    """Collocation residual of the current iterate, g - F(u).

    F uses the cached right-hand side values of this iterate; refresh the
    caches first if the node values were modified by hand.
    """
    F = collocation_defect(rule, weights, dt, sol, form)
    return -F if g is None else g - F


def collocation_defect(
    rule: CollocationRule,
    weights: QuadratureWeights,
    dt: float,
    sol: NodalSolution,
    form: Form = "incremental",
) -> np.ndarray:
    """F(u): what the quadrature relations fail to balance at each node."""
    if form == "incremental":
        Q = dt * np.tensordot(weights.w_nn, sol.f, axes=(1, 0))
        prev = np.concatenate((sol.u0[None], sol.u[:-1]), axis=0)
        return sol.u - prev - Q
    if form == "nonincremental":
        Q0 = dt * np.tensordot(weights.w_0n, sol.f, axes=(1, 0))
        return sol.u - sol.u0[None] - Q0
    raise ValueError(f"unknown residual form {form!r}")


def run_sdc(
    ctx: OperatorContext,
    rule: CollocationRule,
    weights: QuadratureWeights,
    dt: float,
    scheme: Scheme,
    u0: np.ndarray,
    t0: float,
    n_sweeps: int,
    form: Form = "incremental",
    start: str = "predictor",
    observer: Optional[Callable[[int, NodalSolution], None]] = None,
) -> NodalSolution:
    """Predictor plus n_sweeps corrections on one slab.

    The observer, when given, sees every iterate: (0, predictor), (1, after
    the first sweep), and so on.
    """
    if hasattr(ctx, "begin_slab"):
        ctx.begin_slab(np.asarray(u0), t0, dt)
    if start == "predictor":
        sol = predict(ctx, rule, dt, scheme, u0, t0)
    elif start == "constant":
        sol = constant_start(ctx, rule, dt, scheme, u0, t0)
    else:
        raise ValueError(f"unknown start {start!r}")
    if observer is not None:
        observer(0, sol)
    for k in range(1, n_sweeps + 1):
        sol = sweep(ctx, rule, weights, dt, scheme, sol, form=form)
        if observer is not None:
            observer(k, sol)
    return sol


def integrate_sdc(
    ctx: OperatorContext,
    rule: CollocationRule,
    weights: QuadratureWeights,
    scheme: Scheme,
    u0: np.ndarray,
    t0: float,
    dt: float,
    n_steps: int,
    n_sweeps: int,
    form: Form = "incremental",
) -> np.ndarray:
    """March n_steps slabs, each solved with predictor + n_sweeps."""
    u = np.asarray(u0)
    t = t0
    for _ in range(n_steps):
        sol = run_sdc(ctx, rule, weights, dt, scheme, u, t, n_sweeps, form=form)
        u = sol.end_value.copy()
        t += dt
    return u


def solve_collocation(
    ctx: OperatorContext,
    rule: CollocationRule,
    weights: QuadratureWeights,
    dt: float,
    scheme: Scheme,
    u0: np.ndarray,
    t0: float,
    tol: float = 1e-13,
    max_sweeps: int = 200,
) -> NodalSolution:
    """Sweep until the iterate stalls below tol; the collocation fixed point."""
    sol = predict(ctx, rule, dt, scheme, u0, t0)
    for _ in range(max_sweeps):
        new = sweep(ctx, rule, weights, dt, scheme, sol)
        delta = np.max(np.abs(new.u - sol.u))
        scale = max(np.max(np.abs(new.u)), 1.0)
        sol = new
        if delta <= tol * scale:
            break
    return sol
