"""Multilevel SDC: FAS-coupled sweeps over a hierarchy of slab discretizations.

Levels are ordered coarsest to finest. Each V-cycle pre-sweeps from the top
down, restricts solution and residual, composes the coarse FAS right-hand
side, applies N_c sweeps on the coarsest level, and prolongates corrections
back up with one post-sweep on every intermediate level. The finest level is
post-swept only once at the very end of the cycle budget, if at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .collocation import CollocationRule, QuadratureWeights, make_nodes
from .integrators import OperatorContext, Scheme
from .sdc import (
    NodalSolution,
    collocation_defect,
    constant_start,
    from_nodes,
    predict,
    refresh_caches,
    sweep,
)
from .transfer import SpaceTimeTransfer, build_temporal_transfer


@dataclass
class Level:
    """One rung of the hierarchy plus its mutable per-slab state."""

    ctx: OperatorContext
    rule: CollocationRule
    weights: QuadratureWeights
    scheme: Scheme
    u0: Optional[np.ndarray] = None
    t0: float = 0.0
    sol: Optional[NodalSolution] = None
    g: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None


@dataclass
class Hierarchy:
    """Levels (coarsest first), the transfers connecting neighbours, and the
    cycling parameters."""

    levels: list
    transfers: list  # transfers[i] connects levels[i] <-> levels[i+1]
    n_coarse: int = 2
    n_sweep: int = 1
    form: str = "incremental"
    post_sweep_on_finest: bool = True
    presmooth: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if len(self.transfers) != len(self.levels) - 1:
            raise ValueError("need exactly one transfer per adjacent level pair")

    @property
    def fine(self) -> Level:
        return self.levels[-1]


def _defect_of_state(level: Level, u_nodes: np.ndarray, dt: float, form: str) -> np.ndarray:
    """Collocation defect of arbitrary node values, fresh rhs evaluations."""
    times = level.t0 + dt * level.rule.tau
    f = np.stack([level.ctx.eval_rhs(u_nodes[m], times[m]) for m in range(level.rule.M)])
    if form == "incremental":
        Q = dt * np.tensordot(level.weights.w_nn, f, axes=(1, 0))
        prev = np.concatenate((level.u0[None], u_nodes[:-1]), axis=0)
        return u_nodes - prev - Q
    Q0 = dt * np.tensordot(level.weights.w_0n, f, axes=(1, 0))
    return u_nodes - level.u0[None] - Q0


def _defect_of_sol(level: Level, dt: float, form: str) -> np.ndarray:
    return collocation_defect(level.rule, level.weights, dt, level.sol, form)


def fas_residual(level: Level, dt: float, form: str) -> np.ndarray:
    """g - F(u) on this level, using the iterate's cached rhs values."""
    F = _defect_of_sol(level, dt, form)
    return -F if level.g is None else level.g - F


def fas_rhs(hier: Hierarchy, i: int, dt: float) -> np.ndarray:
    """Compose the FAS right-hand side for level i from level i+1.

    Also stores the restricted solution on level i for the later correction.
    """
    upper = hier.levels[i + 1]
    lower = hier.levels[i]
    st = hier.transfers[i]
    r = fas_residual(upper, dt, hier.form)
    v = st.project_solution(upper.sol.u, upper.u0)
    lower.v = v
    return _defect_of_state(lower, v, dt, hier.form) + st.restrict_residual(r)


def _sweep_level(hier: Hierarchy, i: int, dt: float, n: int) -> None:
    lv = hier.levels[i]
    for _ in range(n):
        lv.sol = sweep(lv.ctx, lv.rule, lv.weights, dt, lv.scheme, lv.sol, g=lv.g, form=hier.form)


def v_cycle(hier: Hierarchy, dt: float, top: Optional[int] = None, final: bool = False) -> None:
    """One multigrid cycle over levels[0..top]; top defaults to the finest.

    final controls whether the cycle's top level receives a closing sweep.
    """
    if top is None:
        top = len(hier.levels) - 1
    hier.levels[top].g = None
    for i in range(top, 0, -1):
        _sweep_level(hier, i, dt, hier.n_sweep)
        hier.levels[i - 1].g = fas_rhs(hier, i - 1, dt)
    _sweep_level(hier, 0, dt, hier.n_coarse)
    for i in range(1, top + 1):
        lv = hier.levels[i]
        below = hier.levels[i - 1]
        delta = below.sol.u - below.v
        lv.sol.u = lv.sol.u + hier.transfers[i - 1].interp_correction(delta)
        refresh_caches(lv.ctx, lv.rule, dt, lv.scheme, lv.sol)
        if i < top:
            _sweep_level(hier, i, dt, hier.n_sweep)
    if final and hier.post_sweep_on_finest:
        _sweep_level(hier, top, dt, hier.n_sweep)


def _interp_up(hier: Hierarchy, i: int, dt: float) -> None:
    """Initialize level i+1 from the level-i iterate (solution transfer)."""
    lv = hier.levels[i]
    up = hier.levels[i + 1]
    u_nodes = lv.sol.u
    if hier.presmooth is not None:
        u_nodes = np.stack([hier.presmooth(u) for u in u_nodes])
    fine_nodes = hier.transfers[i].interp_solution(u_nodes, lv.u0)
    up.sol = from_nodes(up.ctx, up.rule, dt, up.scheme, up.u0, up.t0, fine_nodes)


def start(hier: Hierarchy, strategy: str, dt: float, c_fmg: int = 1) -> None:
    """Produce initial iterates on every level.

    constant spreads each level's slab-start state; predictor substeps every
    level independently; cascade walks coarse to fine with one corrector
    sweep per level below the finest; fmg grows the hierarchy with c_fmg
    V-cycles per added level. For two levels cascade and fmg coincide.
    """
    L = len(hier.levels)
    for lv in hier.levels:
        lv.g = None
        lv.v = None
    if strategy == "constant":
        for lv in hier.levels:
            lv.sol = constant_start(lv.ctx, lv.rule, dt, lv.scheme, lv.u0, lv.t0)
        return
    if strategy == "predictor":
        for lv in hier.levels:
            lv.sol = predict(lv.ctx, lv.rule, dt, lv.scheme, lv.u0, lv.t0)
        return
    if strategy == "cascade":
        lv0 = hier.levels[0]
        lv0.sol = predict(lv0.ctx, lv0.rule, dt, lv0.scheme, lv0.u0, lv0.t0)
        for i in range(L - 1):
            _sweep_level(hier, i, dt, hier.n_sweep)
            _interp_up(hier, i, dt)
        return
    if strategy == "fmg":
        lv0 = hier.levels[0]
        lv0.sol = predict(lv0.ctx, lv0.rule, dt, lv0.scheme, lv0.u0, lv0.t0)
        _sweep_level(hier, 0, dt, hier.n_sweep)
        _interp_up(hier, 0, dt)
        for t in range(1, L - 1):
            for _ in range(c_fmg):
                v_cycle(hier, dt, top=t, final=False)
            _interp_up(hier, t, dt)
        return
    raise ValueError(f"unknown start strategy {strategy!r}")


def begin_slab(hier: Hierarchy, u0_fine: np.ndarray, t0: float, dt: float) -> None:
    """Set slab-start states on all levels (coarse ones by spatial projection)
    and give each operator the chance to freeze per-slab data."""
    L = len(hier.levels)
    hier.levels[-1].u0 = np.asarray(u0_fine).copy()
    for i in range(L - 2, -1, -1):
        hier.levels[i].u0 = hier.transfers[i].spatial.apply(
            "project", hier.levels[i + 1].u0
        )
    for lv in hier.levels:
        lv.t0 = t0
        lv.sol = None
        lv.g = None
        lv.v = None
        if hasattr(lv.ctx, "begin_slab"):
            lv.ctx.begin_slab(lv.u0, t0, dt)


def run_mlsdc(
    hier: Hierarchy,
    u0_fine: np.ndarray,
    t0: float,
    dt: float,
    n_cycles: int,
    strategy: str = "predictor",
    c_fmg: int = 1,
    observer: Optional[Callable[[int, NodalSolution], None]] = None,
) -> NodalSolution:
    """One slab: start, n_cycles V-cycles, closing fine sweep if enabled.

    The observer sees the fine-level iterate as it would stand if iteration
    stopped there: index 0 after the start, index c after cycle c including
    the closing sweep. Cycles beyond the first run on a fine level that was
    not post-swept, matching the cycle algorithm.
    """
    begin_slab(hier, u0_fine, t0, dt)
    start(hier, strategy, dt, c_fmg=c_fmg)
    if observer is not None:
        observer(0, hier.fine.sol)
    for c in range(1, n_cycles + 1):
        v_cycle(hier, dt, final=False)
        if observer is not None:
            snap = hier.fine.sol
            if hier.post_sweep_on_finest:
                lv = hier.fine
                snap = sweep(lv.ctx, lv.rule, lv.weights, dt, lv.scheme, snap, form=hier.form)
            observer(c, snap)
    if hier.post_sweep_on_finest and n_cycles > 0:
        _sweep_level(hier, len(hier.levels) - 1, dt, hier.n_sweep)
    return hier.fine.sol


def integrate_mlsdc(
    hier: Hierarchy,
    u0_fine: np.ndarray,
    t0: float,
    dt: float,
    n_steps: int,
    n_cycles: int,
    strategy: str = "predictor",
    c_fmg: int = 1,
) -> np.ndarray:
    """March n_steps slabs, each solved by run_mlsdc."""
    u = np.asarray(u0_fine)
    t = t0
    for _ in range(n_steps):
        sol = run_mlsdc(hier, u, t, dt, n_cycles, strategy=strategy, c_fmg=c_fmg)
        u = sol.end_value.copy()
        t += dt
    return u


def equivalence_products(
    coarse_rule: CollocationRule,
    fine_rule: CollocationRule,
    node_convention: str = "nodes_only",
    projection_kind: str = "embedded",
) -> tuple[np.ndarray, np.ndarray]:
    """The two operator products whose difference separates the sweep forms.

    The zero-to-node accumulation matrix C (unit lower-triangular ones) does
    not commute with the residual restriction R: C_coarse R differs from
    R C_fine, so the incremental and non-incremental multilevel correctors
    genuinely differ. Returns (C_coarse R, R C_fine).
    """
    pair = build_temporal_transfer(
        coarse_rule, fine_rule, projection_kind, node_convention
    )
    R = pair.restrict
    n_c, n_f = R.shape
    C_c = np.tril(np.ones((n_c, n_c)))
    C_f = np.tril(np.ones((n_f, n_f)))
    return C_c @ R, R @ C_f


def _rounded_ratios(dims: list[tuple[int, int, int]]) -> list[float]:
    # work unit per sweep: (P+1) * N_e * M, expressed relative to the finest
    units = [(p + 1) * ne * m for (ne, p, m) in dims]
    return [round(u / units[-1], 2) for u in units]


def cost_sdc(n_sweeps: int) -> float:
    """Fine-grid-operation equivalents of predictor-plus-sweeps SDC."""
    return float(n_sweeps)


def cost_mlsdc_cycle(
    dims: list[tuple[int, int, int]],
    n_coarse: int = 2,
    include_finest_post: bool = False,
) -> float:
    """Modeled cost of one V-cycle in fine-grid sweep equivalents.

    dims lists (N_e, P, M) coarsest first. Intermediate levels pay a pre- and
    a post-sweep, the coarsest its n_coarse sweeps, the finest one pre-sweep;
    the closing fine sweep is excluded by default because it runs once per
    slab, not once per cycle. Level ratios are rounded to two decimals first,
    matching the resolution the model is quoted at.
    """
    r = _rounded_ratios(dims)
    cost = 1.0 + (1.0 if include_finest_post else 0.0)
    for x in r[1:-1]:
        cost += 2.0 * x
    cost += n_coarse * r[0]
    return round(cost, 10)


def cost_start(
    dims: list[tuple[int, int, int]],
    strategy: str,
    n_coarse: int = 2,
    c_fmg: int = 1,
) -> float:
    """Modeled one-off cost of a starting strategy, in fine sweep units.

    Predictor passes are not charged; only corrector sweeps count.
    """
    r = _rounded_ratios(dims)
    L = len(dims)
    if strategy in ("constant", "predictor"):
        return 0.0
    if strategy == "cascade":
        return round(sum(r[:-1]), 10)
    if strategy == "fmg":
        cost = r[0]
        for t in range(1, L - 1):
            sub = r[t] + 2.0 * sum(r[1:t]) + n_coarse * r[0]
            cost += c_fmg * sub
        return round(cost, 10)
    raise ValueError(f"unknown start strategy {strategy!r}")


def build_dahlquist_hierarchy(
    z: complex | np.ndarray,
    Ms: list[int],
    scheme: Scheme = "si2",
    kind: str = "radau_right",
    n_coarse: int = 2,
    form: str = "incremental",
    node_convention: str = "nodes_only",
    post_sweep_on_finest: bool = True,
) -> Hierarchy:
    """Hierarchy of scalar test levels that differ only in node count.

    z (scalar or array) is split into an imaginary convective rate and a real
    diffusive rate; array-valued z runs a whole grid of problems at once.
    """
    from .collocation import make_weights
    from .integrators import DahlquistContext
    from .transfer import build_identity_spatial

    z = np.asarray(z, dtype=complex)
    levels = []
    for M in Ms:
        rule = make_nodes(kind, M)
        ctx = DahlquistContext(lam_ex=1j * z.imag, lam_im=z.real)
        levels.append(Level(ctx, rule, make_weights(rule), scheme))
    transfers = []
    ndof = int(np.prod(z.shape)) if z.shape else 1
    for lo, hi in zip(levels[:-1], levels[1:]):
        pair = build_temporal_transfer(
            lo.rule, hi.rule, node_convention=node_convention
        )
        transfers.append(SpaceTimeTransfer(pair, build_identity_spatial(ndof)))
    return Hierarchy(
        levels,
        transfers,
        n_coarse=n_coarse,
        form=form,
        post_sweep_on_finest=post_sweep_on_finest,
    )
