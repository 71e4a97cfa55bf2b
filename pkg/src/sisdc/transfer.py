"""Inter-level transfer operators in time and space.

Three matrices per axis: coarse-to-fine interpolation (interp), fine-to-coarse
solution transfer (project), and residual restriction (restrict), the last
always the transpose of interp. Projection evaluates the fine interpolant at
coarse nodes by default; an L2 variant with exact Gram matrices is available
where conservation matters.

Temporal operators come in two node conventions: acting on the M node values
alone, or on M+1 values with the slab start prepended. The printed comparison
matrices of the non-equivalence discussion are reproduced by the nodes-only
convention (see analysis.equivalence_matrices); runs default to it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .collocation import CollocationRule, gauss_legendre, lagrange_matrix

Direction = str  # "interp" | "project" | "restrict"


@dataclass(frozen=True)
class TransferPair:
    """Dense operator triple for one axis."""

    interp: np.ndarray
    project: np.ndarray
    restrict: np.ndarray
    axis: str  # "temporal" | "spatial-p" | "spatial-h" | "identity"
    projection_kind: str  # "embedded" | "l2"
    meta: dict

    def matrix(self, direction: Direction) -> np.ndarray:
        if direction == "interp":
            return self.interp
        if direction == "project":
            return self.project
        if direction == "restrict":
            return self.restrict
        raise ValueError(f"unknown direction {direction!r}")


def _l2_project_matrix(src_nodes, dst_nodes, domain=(0.0, 1.0)) -> np.ndarray:
    """Orthogonal projection from the src nodal space onto the dst space."""
    a, b = domain
    gx, gw = gauss_legendre(len(src_nodes) + 3)
    pts = 0.5 * (b - a) * gx + 0.5 * (a + b)
    wts = 0.5 * (b - a) * gw
    Ld = lagrange_matrix(np.asarray(dst_nodes), pts)
    Ls = lagrange_matrix(np.asarray(src_nodes), pts)
    G = Ld.T @ (wts[:, None] * Ld)
    B = Ld.T @ (wts[:, None] * Ls)
    return np.linalg.solve(G, B)


def build_temporal_transfer(
    coarse_rule: CollocationRule,
    fine_rule: CollocationRule,
    projection_kind: str = "embedded",
    node_convention: str = "nodes_only",
) -> TransferPair:
    """Transfers between the node sets of two collocation rules.

    nodes_plus_t0 prepends t = 0 as a degree of freedom on both sides; apply
    functions then carry the slab-start value through the transfer and drop
    it from the output.
    """
    if coarse_rule.M > fine_rule.M:
        raise ValueError("coarse rule must not have more nodes than the fine one")
    if node_convention == "nodes_only":
        src, dst = coarse_rule.tau, fine_rule.tau
    elif node_convention == "nodes_plus_t0":
        src = np.concatenate(([0.0], coarse_rule.tau))
        dst = np.concatenate(([0.0], fine_rule.tau))
    else:
        raise ValueError(f"unknown node convention {node_convention!r}")
    interp = lagrange_matrix(src, dst)
    if projection_kind == "embedded":
        project = lagrange_matrix(dst, src)
    elif projection_kind == "l2":
        project = _l2_project_matrix(dst, src)
    else:
        raise ValueError(f"unknown projection kind {projection_kind!r}")
    return TransferPair(
        interp=interp,
        project=project,
        restrict=interp.T.copy(),
        axis="temporal",
        projection_kind=projection_kind,
        meta={"node_convention": node_convention, "M": (coarse_rule.M, fine_rule.M)},
    )


def apply_temporal(
    pair: TransferPair,
    direction: Direction,
    nodes: np.ndarray,
    u0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Apply a temporal pair along the leading (node) axis.

    With the nodes_plus_t0 convention, interp and project carry u0 of the
    source level through the matrix; restrict pads the slab-start residual
    with zero. The output keeps node values only.
    """
    A = pair.matrix(direction)
    if pair.meta.get("node_convention") == "nodes_plus_t0":
        if direction == "restrict":
            top = np.zeros_like(nodes[:1])
        else:
            if u0 is None:
                raise ValueError("nodes_plus_t0 transfers need the source u0")
            top = u0[None]
        aug = np.concatenate((top, nodes), axis=0)
        return np.tensordot(A, aug, axes=(1, 0))[1:]
    return np.tensordot(A, nodes, axes=(1, 0))


def _identity_pair(n: int, axis: str = "identity") -> TransferPair:
    eye = np.eye(n)
    return TransferPair(eye, eye.copy(), eye.copy(), axis, "embedded", {})


@dataclass(frozen=True)
class SpatialTransfer:
    """Block operators between two element meshes sharing a domain.

    kind "p" changes the polynomial degree on a fixed mesh, "h" fuses two
    fine elements into one coarse parent, "identity" is the degenerate case.
    Blocks act per element (pair); dense whole-field matrices are available
    for inspection through as_pair().
    """

    kind: str
    ncomp: int
    ne_coarse: int
    ne_fine: int
    np_coarse: int  # nodes per element
    np_fine: int
    blocks: dict
    projection_kind: str
    jump_policy: Optional[str] = None

    def apply(self, direction: Direction, u_flat: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return u_flat.copy()
        if self.kind == "p":
            return self._apply_p(direction, u_flat)
        return self._apply_h(direction, u_flat)

    def _apply_p(self, direction, u_flat):
        if direction == "interp":
            u = u_flat.reshape(self.ncomp, self.ne_coarse, self.np_coarse)
            A = self.blocks["interp"]
        else:
            u = u_flat.reshape(self.ncomp, self.ne_fine, self.np_fine)
            A = self.blocks[direction]
        return np.einsum("ij,cnj->cni", A, u).reshape(-1)

    def _apply_h(self, direction, u_flat):
        p1 = self.np_coarse
        if direction == "interp":
            u = u_flat.reshape(self.ncomp, self.ne_coarse, p1)
            pair = np.einsum("kij,cnj->cnki", self.blocks["interp_lr"], u)
            return pair.reshape(-1)
        u = u_flat.reshape(self.ncomp, self.ne_coarse, 2, p1)
        if direction == "project":
            PL, PR = self.blocks["project_lr"]
        else:
            IL, IR = self.blocks["interp_lr"]
            PL, PR = IL.T, IR.T
        out = np.einsum("ij,cnj->cni", PL, u[:, :, 0]) + np.einsum(
            "ij,cnj->cni", PR, u[:, :, 1]
        )
        return out.reshape(-1)

    def as_pair(self) -> TransferPair:
        """Materialize the whole-field dense matrices."""
        n_c = self.ncomp * self.ne_coarse * self.np_coarse
        n_f = self.ncomp * self.ne_fine * self.np_fine
        interp = np.zeros((n_f, n_c))
        project = np.zeros((n_c, n_f))
        for j in range(n_c):
            e = np.zeros(n_c)
            e[j] = 1.0
            interp[:, j] = self.apply("interp", e)
        for j in range(n_f):
            e = np.zeros(n_f)
            e[j] = 1.0
            project[:, j] = self.apply("project", e)
        return TransferPair(
            interp,
            project,
            interp.T.copy(),
            f"spatial-{self.kind}",
            self.projection_kind,
            {"jump_policy": self.jump_policy},
        )


def _gll_reference(n: int) -> np.ndarray:
    # Gauss-Lobatto-Legendre nodes on [-1, 1] via the unit-interval rule
    from .collocation import make_nodes

    return 2.0 * make_nodes("lobatto", n).tau - 1.0


def build_spatial_p_transfer(
    p_coarse: int,
    p_fine: int,
    n_elem: int,
    ncomp: int = 1,
    projection_kind: str = "embedded",
) -> SpatialTransfer:
    """Degree change on a fixed mesh; identical block for every element."""
    if p_coarse > p_fine:
        raise ValueError("coarse degree must not exceed fine degree")
    if p_coarse == p_fine:
        return SpatialTransfer(
            "identity", ncomp, n_elem, n_elem, p_coarse + 1, p_fine + 1, {}, "embedded"
        )
    xc = _gll_reference(p_coarse + 1)
    xf = _gll_reference(p_fine + 1)
    interp = lagrange_matrix(xc, xf)
    if projection_kind == "embedded":
        project = lagrange_matrix(xf, xc)
    elif projection_kind == "l2":
        project = _l2_project_matrix(xf, xc, domain=(-1.0, 1.0))
    else:
        raise ValueError(f"unknown projection kind {projection_kind!r}")
    return SpatialTransfer(
        "p",
        ncomp,
        n_elem,
        n_elem,
        p_coarse + 1,
        p_fine + 1,
        {"interp": interp, "project": project, "restrict": interp.T.copy()},
        projection_kind,
    )


def build_spatial_h_transfer(
    ne_coarse: int,
    p: int,
    ncomp: int = 1,
    projection_kind: str = "embedded",
    jump_policy: str = "linear_blend",
) -> SpatialTransfer:
    """2:1 element coarsening: each parent element owns two children.

    Embedded projection evaluates each child on its half of the parent and
    averages the two contributions at the parent center node (present for
    even degree). Because the children may be discontinuous at their shared
    interface, a jump policy preprocesses the pair: linear_blend removes the
    interface jump with linear ramps that vanish at the parent's outer ends,
    average replaces the two interface coefficients by their mean.
    """
    p1 = p + 1
    xi = _gll_reference(p1)
    IL = lagrange_matrix(xi, 0.5 * (xi - 1.0))
    IR = lagrange_matrix(xi, 0.5 * (xi + 1.0))
    # jump preprocessor acting on the stacked child pair
    B = np.eye(2 * p1)
    if jump_policy == "linear_blend":
        d = np.zeros(2 * p1)
        d[p1] = 1.0
        d[p1 - 1] = -1.0  # J = uR(-1) - uL(+1)
        B[:p1] += np.outer(0.25 * (1.0 + xi), d)
        B[p1:] -= np.outer(0.25 * (1.0 - xi), d)
    elif jump_policy == "average":
        B[p1 - 1] = 0.0
        B[p1 - 1, p1 - 1] = B[p1 - 1, p1] = 0.5
        B[p1] = B[p1 - 1]
    else:
        raise ValueError(f"unknown jump policy {jump_policy!r}")
    if projection_kind == "embedded":
        E = np.zeros((p1, 2 * p1))
        for i, x in enumerate(xi):
            if x < 0.0:
                E[i, :p1] = lagrange_matrix(xi, np.array([2.0 * x + 1.0]))[0]
            elif x > 0.0:
                E[i, p1:] = lagrange_matrix(xi, np.array([2.0 * x - 1.0]))[0]
            else:
                E[i, p1 - 1] = E[i, p1] = 0.5
        P = E @ B
    elif projection_kind == "l2":
        # Galerkin projection of the piecewise child data onto the parent,
        # exact quadrature; conservative by construction, no jump handling
        gx, gw = gauss_legendre(p1 + 3)
        Lp = lagrange_matrix(xi, gx)
        G = Lp.T @ (gw[:, None] * Lp)
        # child sections in parent coordinates: x in [-1,0] and [0,1]
        xl = 0.5 * gx - 0.5
        xr = 0.5 * gx + 0.5
        BL = lagrange_matrix(xi, xl).T @ (0.5 * gw[:, None] * lagrange_matrix(xi, gx))
        BR = lagrange_matrix(xi, xr).T @ (0.5 * gw[:, None] * lagrange_matrix(xi, gx))
        Gi = np.linalg.inv(G)
        P = np.concatenate((Gi @ BL, Gi @ BR), axis=1)
    else:
        raise ValueError(f"unknown projection kind {projection_kind!r}")
    return SpatialTransfer(
        "h",
        ncomp,
        ne_coarse,
        2 * ne_coarse,
        p1,
        p1,
        {"interp_lr": np.stack((IL, IR)), "project_lr": (P[:, :p1], P[:, p1:])},
        projection_kind,
        jump_policy,
    )


def build_identity_spatial(ndof: int) -> SpatialTransfer:
    return SpatialTransfer("identity", 1, 1, 1, ndof, ndof, {}, "embedded")


@dataclass(frozen=True)
class SpaceTimeTransfer:
    """Tensor composition of a temporal and a spatial pair.

    Fine-to-coarse directions apply the spatial factor first, coarse-to-fine
    the temporal one; the factors commute up to roundoff.
    """

    temporal: TransferPair
    spatial: SpatialTransfer

    def project_solution(self, u_nodes_f: np.ndarray, u0_f: Optional[np.ndarray] = None) -> np.ndarray:
        sp = np.stack([self.spatial.apply("project", u) for u in u_nodes_f])
        u0_c = None if u0_f is None else self.spatial.apply("project", u0_f)
        return apply_temporal(self.temporal, "project", sp, u0_c)

    def restrict_residual(self, r_nodes_f: np.ndarray) -> np.ndarray:
        sp = np.stack([self.spatial.apply("restrict", r) for r in r_nodes_f])
        return apply_temporal(self.temporal, "restrict", sp)

    def interp_correction(self, d_nodes_c: np.ndarray) -> np.ndarray:
        # corrections vanish at the slab start, so t0 carries zero
        zero = np.zeros_like(d_nodes_c[0])
        tmp = apply_temporal(self.temporal, "interp", d_nodes_c, zero)
        return np.stack([self.spatial.apply("interp", d) for d in tmp])

    def interp_solution(self, u_nodes_c: np.ndarray, u0_c: Optional[np.ndarray] = None) -> np.ndarray:
        tmp = apply_temporal(self.temporal, "interp", u_nodes_c, u0_c)
        return np.stack([self.spatial.apply("interp", u) for u in tmp])


def dump_pair_csv(pair: TransferPair, path_prefix: str) -> list[str]:
    """Write the three matrices as CSV (row-major, 17 significant digits)."""
    written = []
    for name in ("interp", "project", "restrict"):
        path = f"{path_prefix}_{name}.csv"
        A = pair.matrix(name)
        with open(path, "w") as f:
            for row in np.atleast_2d(A):
                f.write(",".join(f"{v:.17g}" for v in row) + "\n")
        written.append(path)
    return written
