"""Dahlquist-mode stability and accuracy maps, error norms, and the
iteration-convergence detector shared by all experiment tables.

Every method runs one step of du/dt = lambda u with dt = 1 and u(0) = 1;
the imaginary part of z plays the explicitly treated convective rate, the
real part the implicitly treated diffusive one.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .collocation import make_nodes, make_weights
from .integrators import DahlquistContext
from .mlsdc import build_dahlquist_hierarchy, run_mlsdc
from .sdc import run_sdc, solve_collocation


@dataclass(frozen=True)
class MethodSpec:
    """What to run in Dahlquist mode.

    A single entry in levels means plain SDC with `iterations` sweeps;
    several entries mean MLSDC with `iterations` V-cycles plus the closing
    fine sweep. kind overrides the choice: "collocation" iterates the finest
    rule to its fixed point, "exact" plugs in the exponential.
    """

    levels: tuple[int, ...] = (7,)
    scheme: str = "si2"
    nodes: str = "radau_right"
    iterations: int = 5
    n_coarse: int = 2
    start: str = "predictor"
    form: str = "incremental"
    kind: str = "auto"
    c_fmg: int = 1

    def resolved_kind(self) -> str:
        if self.kind != "auto":
            return self.kind
        return "sdc" if len(self.levels) == 1 else "mlsdc"


@dataclass(frozen=True)
class GridSpec:
    """Sampling window in the complex z plane, upper half by symmetry."""

    z_r: tuple[float, float] = (-40.0, 5.0)
    z_i: tuple[float, float] = (0.0, 40.0)
    n_r: int = 181
    n_i: int = 161

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.linspace(self.z_r[0], self.z_r[1], self.n_r),
            np.linspace(self.z_i[0], self.z_i[1], self.n_i),
        )


@dataclass(frozen=True)
class StabilityMap:
    zr: np.ndarray
    zi: np.ndarray
    values: np.ndarray  # (n_i, n_r), |R| or |R - e^z|
    quantity: str
    method: MethodSpec


@dataclass(frozen=True)
class ContourSet:
    level: float
    polylines: list


def amplification(method: MethodSpec, z: np.ndarray) -> np.ndarray:
    """u(1) for the configured method, vectorized over an array of z."""
    z = np.asarray(z, dtype=complex)
    kind = method.resolved_kind()
    if kind == "exact":
        return np.exp(z)
    flat = z.ravel()
    u0 = np.ones(flat.shape, dtype=complex)
    if kind == "collocation":
        rule = make_nodes(method.nodes, method.levels[-1])
        w = make_weights(rule)
        ctx = DahlquistContext(lam_ex=1j * flat.imag, lam_im=flat.real)
        sol = solve_collocation(ctx, rule, w, 1.0, method.scheme, u0, 0.0)
        out = sol.end_value
    elif kind == "sdc":
        rule = make_nodes(method.nodes, method.levels[0])
        w = make_weights(rule)
        ctx = DahlquistContext(lam_ex=1j * flat.imag, lam_im=flat.real)
        sol = run_sdc(
            ctx, rule, w, 1.0, method.scheme, u0, 0.0,
            method.iterations, form=method.form, start=method.start,
        )
        out = sol.end_value
    elif kind == "mlsdc":
        hier = build_dahlquist_hierarchy(
            flat, list(method.levels), method.scheme, method.nodes,
            n_coarse=method.n_coarse, form=method.form,
        )
        sol = run_mlsdc(
            hier, u0, 0.0, 1.0, method.iterations,
            strategy=method.start, c_fmg=method.c_fmg,
        )
        out = sol.end_value
    else:
        raise ValueError(f"unknown method kind {kind!r}")
    return np.asarray(out).reshape(z.shape)


def amplification_history(method: MethodSpec, z: np.ndarray) -> np.ndarray:
    """u(1) after every iterate: index 0 is the start, index k the state
    after sweep (or cycle) k; multilevel snapshots include the closing fine
    sweep so index k carries k+1 fine corrector sweeps."""
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    u0 = np.ones(flat.shape, dtype=complex)
    hist: list[np.ndarray] = []

    def grab(_k, sol):
        hist.append(np.asarray(sol.end_value).copy())

    kind = method.resolved_kind()
    if kind == "sdc":
        rule = make_nodes(method.nodes, method.levels[0])
        w = make_weights(rule)
        ctx = DahlquistContext(lam_ex=1j * flat.imag, lam_im=flat.real)
        run_sdc(
            ctx, rule, w, 1.0, method.scheme, u0, 0.0,
            method.iterations, form=method.form, start=method.start,
            observer=grab,
        )
    elif kind == "mlsdc":
        hier = build_dahlquist_hierarchy(
            flat, list(method.levels), method.scheme, method.nodes,
            n_coarse=method.n_coarse, form=method.form,
        )
        run_mlsdc(
            hier, u0, 0.0, 1.0, method.iterations,
            strategy=method.start, c_fmg=method.c_fmg, observer=grab,
        )
    else:
        raise ValueError("history needs an iterative method, got " + kind)
    return np.stack(hist).reshape((len(hist),) + z.shape)


def stability_function(method: MethodSpec, z: complex) -> complex:
    """Amplification factor R(z) of one dt = 1 step from u(0) = 1."""
    return complex(amplification(method, np.asarray(z, dtype=complex)).item())


def scan_map(
    method: MethodSpec,
    grid: GridSpec = GridSpec(),
    quantity: str = "stability",
) -> StabilityMap:
    """Sample |R| ("stability") or |R - e^z| ("accuracy") on the grid."""
    if grid.n_r < 16 or grid.n_i < 16:
        raise ValueError("grid must resolve at least 16x16 points")
    if quantity not in ("stability", "accuracy"):
        raise ValueError(f"unknown map quantity {quantity!r}")
    zr, zi = grid.axes()
    Z = zr[None, :] + 1j * zi[:, None]
    R = amplification(method, Z)
    if quantity == "stability":
        vals = np.abs(R)
    else:
        vals = np.abs(R - np.exp(Z))
    return StabilityMap(zr, zi, vals, quantity, method)


def region_area(smap: StabilityMap, level: float = 1.0) -> float:
    """Window area where the sampled value is at or below level."""
    dr = (smap.zr[-1] - smap.zr[0]) / (smap.zr.size - 1)
    di = (smap.zi[-1] - smap.zi[0]) / (smap.zi.size - 1)
    return float(np.count_nonzero(smap.values <= level) * dr * di)


# marching squares: corner bits (bl, br, tr, tl), edges 0 bottom, 1 right,
# 2 top, 3 left; cases 5 and 10 are disambiguated by the cell average
_CASES = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)],
    6: [(0, 2)], 7: [(3, 2)], 8: [(2, 3)], 9: [(0, 2)],
    11: [(1, 2)], 12: [(3, 1)], 13: [(0, 1)], 14: [(3, 0)],
}


def _edge_point(edge, x0, x1, y0, y1, v, level):
    bl, br, tr, tl = v
    if edge == 0:
        t = (level - bl) / (br - bl)
        return (x0 + t * (x1 - x0), y0)
    if edge == 1:
        t = (level - br) / (tr - br)
        return (x1, y0 + t * (y1 - y0))
    if edge == 2:
        t = (level - tl) / (tr - tl)
        return (x0 + t * (x1 - x0), y1)
    t = (level - bl) / (tl - bl)
    return (x0, y0 + t * (y1 - y0))


def _cell_segments(x0, x1, y0, y1, v, level):
    bl, br, tr, tl = v
    case = (bl > level) | ((br > level) << 1) | ((tr > level) << 2) | ((tl > level) << 3)
    if case in (0, 15):
        return []
    if case in (5, 10):
        above = 0.25 * (bl + br + tr + tl) > level
        if case == 5:
            pairs = [(0, 1), (2, 3)] if above else [(3, 0), (1, 2)]
        else:
            pairs = [(3, 0), (1, 2)] if above else [(0, 1), (2, 3)]
    else:
        pairs = _CASES[case]
    return [
        (_edge_point(a, x0, x1, y0, y1, v, level),
         _edge_point(b, x0, x1, y0, y1, v, level))
        for a, b in pairs
    ]


def _chain(segments) -> list:
    """Stitch segments into polylines by matching endpoints."""

    def key(p):
        return (round(p[0], 9), round(p[1], 9))

    ends = defaultdict(list)
    for idx, (a, b) in enumerate(segments):
        ends[key(a)].append(idx)
        ends[key(b)].append(idx)
    unused = set(range(len(segments)))
    lines = []
    while unused:
        idx = unused.pop()
        a, b = segments[idx]
        line = [a, b]
        for grow_end in (1, 0):
            while True:
                tip = line[-1] if grow_end else line[0]
                nxt = [j for j in ends[key(tip)] if j in unused]
                if not nxt:
                    break
                j = nxt[0]
                unused.discard(j)
                pa, pb = segments[j]
                new = pb if key(pa) == key(tip) else pa
                if grow_end:
                    line.append(new)
                else:
                    line.insert(0, new)
        lines.append(np.array(line))
    return lines


def extract_contour(smap: StabilityMap, level: float) -> ContourSet:
    """Polylines of the value == level contour, linearly interpolated."""
    V = smap.values
    segs = []
    for i in range(V.shape[0] - 1):
        y0, y1 = smap.zi[i], smap.zi[i + 1]
        for j in range(V.shape[1] - 1):
            x0, x1 = smap.zr[j], smap.zr[j + 1]
            corners = (V[i, j], V[i, j + 1], V[i + 1, j + 1], V[i + 1, j])
            segs.extend(_cell_segments(x0, x1, y0, y1, corners, level))
    return ContourSet(level, _chain(segs))


def l2_error(value, exact, weights=None) -> float:
    """Relative L2 distance; falls back to absolute for a zero reference."""
    d = np.asarray(value) - np.asarray(exact)
    e = np.asarray(exact)
    if weights is None:
        num = float(np.sqrt(np.sum(np.abs(d) ** 2)))
        den = float(np.sqrt(np.sum(np.abs(e) ** 2)))
    else:
        w = np.asarray(weights)
        num = float(np.sqrt(np.sum(w * np.abs(d) ** 2)))
        den = float(np.sqrt(np.sum(w * np.abs(e) ** 2)))
    return num / den if den > 0.0 else num


def observed_order(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    """Convergence order from one refinement: log(e_c/e_f) / log(ratio)."""
    if e_coarse <= 0.0 or e_fine <= 0.0:
        raise ValueError("observed order needs strictly positive errors")
    if ratio <= 1.0:
        raise ValueError("refinement ratio must exceed 1")
    return float(np.log(e_coarse / e_fine) / np.log(ratio))


def converged_iteration(error_series, threshold: float = 0.1) -> Optional[int]:
    """First index whose relative change from the previous entry falls below
    threshold; None when the series never settles."""
    e = [float(x) for x in error_series]
    if len(e) < 2:
        raise ValueError("need at least two error entries")
    for k in range(1, len(e)):
        prev = e[k - 1]
        if prev == 0.0:
            change = 0.0 if e[k] == 0.0 else np.inf
        else:
            change = abs(e[k] - prev) / abs(prev)
        if change < threshold:
            return k
    return None


def sweeps_to_tolerance(method: MethodSpec, z: complex, tol: float) -> Optional[int]:
    """Smallest iterate index with |R - e^z| <= tol, scanning the history of
    a single run; None if the budget in method.iterations never reaches it."""
    zc = np.asarray(complex(z))
    hist = amplification_history(method, zc)
    err = np.abs(hist - np.exp(zc))
    hits = np.nonzero(err <= tol)[0]
    return int(hits[0]) if hits.size else None
