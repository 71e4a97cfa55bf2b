"""Nodal DG discretization of 1-D conservation laws on a uniform mesh.

Elements carry a Gauss-Lobatto-Legendre nodal basis of degree P. Convection
uses the weak form with a Rusanov face flux, diffusion an interior-penalty
form that accepts scalar or matrix-valued coefficient fields, so the same
code path serves the physical diffusion operator and the modified
coefficient of the semi-implicit substeppers. Implicit substeps are solved
with a sparse direct factorization of the frozen-coefficient matrix plus
defect iterations against the true coefficient; for linear problems the
factorization alone is exact and the iteration never runs.

All states travel as flat vectors of length ncomp * n_elem * (P + 1),
reshapeable to (ncomp, n_elem, P + 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Any, Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .collocation import _legendre, gauss_lobatto


class SolverError(RuntimeError):
    """Raised when the discrete solver breaks down (blowup, stalled solve)."""


def _diff_matrix(x: np.ndarray) -> np.ndarray:
    """Collocation derivative matrix D[i, j] = ell_j'(x_i), barycentric form."""
    n = len(x)
    lam = np.array([1.0 / np.prod(x[j] - np.delete(x, j)) for j in range(n)])
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (lam[j] / lam[i]) / (x[i] - x[j])
        D[i, i] = -np.sum(D[i])
    return D


@lru_cache(maxsize=None)
def compute_delta(degree: int) -> float:
    """Spectral radius of the inflow-stripped collocation derivative.

    Grid spacings are compared across polynomial degrees through
    dx_eff = dx_elem / (2 delta(P)); delta grows like P^2, so a fixed CFL
    number keeps the explicit stability margin roughly constant under
    p-refinement.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    x, _ = gauss_lobatto(degree + 1)
    L = -_diff_matrix(x)[1:, 1:]
    return float(np.max(np.abs(np.linalg.eigvals(L))))


def cfl_number(dt: float, dx_elem: float, lam_max: float, degree: int) -> float:
    """Convective CFL number on the delta-normalized grid spacing."""
    return dt * lam_max * 2.0 * compute_delta(degree) / dx_elem


def dt_from_cfl(cfl: float, dx_elem: float, lam_max: float, degree: int) -> float:
    """Time step that realizes the requested CFL number."""
    return cfl * dx_elem / (2.0 * compute_delta(degree) * lam_max)


@dataclass(frozen=True)
class Mesh1D:
    """Uniform 1-D mesh of n_elem elements with degree-P GLL nodes."""

    x_left: float
    x_right: float
    n_elem: int
    degree: int
    bc: str = "periodic"

    def __post_init__(self):
        if self.x_right <= self.x_left:
            raise ValueError("empty domain")
        if self.n_elem < 1 or self.degree < 1:
            raise ValueError("need at least one element and degree >= 1")
        if self.bc not in ("periodic", "dirichlet"):
            raise ValueError(f"unknown bc {self.bc!r}")

    @property
    def dx(self) -> float:
        return (self.x_right - self.x_left) / self.n_elem

    @cached_property
    def ref_nodes(self) -> np.ndarray:
        return gauss_lobatto(self.degree + 1)[0]

    @cached_property
    def ref_weights(self) -> np.ndarray:
        return gauss_lobatto(self.degree + 1)[1]

    @cached_property
    def nodes_x(self) -> np.ndarray:
        """Physical node coordinates, shape (n_elem, degree + 1)."""
        edges = self.x_left + self.dx * np.arange(self.n_elem)
        return edges[:, None] + 0.5 * self.dx * (self.ref_nodes + 1.0)[None, :]


@dataclass(frozen=True)
class ArtificialViscosityParams:
    """Modal shock sensor settings: ramp width kappa_s, amplitude scale c_s."""

    kappa_s: float
    c_s: float


class DGOperator:
    """Spatial operator bundle for one mesh/problem pair.

    Implements the operator-context interface the sweeps consume: rhs
    evaluation, the split convection/diffusion applications, modified
    coefficient construction, and the implicit substep solver.
    """

    def __init__(self, mesh: Mesh1D, problem, av: Optional[ArtificialViscosityParams] = None,
                 penalty_const: float = 2.0):
        self.mesh = mesh
        self.problem = problem
        self.av = av
        self.ncomp = problem.ncomp
        p1 = mesh.degree + 1
        self.p1 = p1
        self.D = _diff_matrix(mesh.ref_nodes)
        self.DTW = self.D.T * mesh.ref_weights[None, :]
        self.mass_node = 0.5 * mesh.dx * mesh.ref_weights
        self.inv_mass = 1.0 / self.mass_node
        self.mu0 = penalty_const * p1**2 / mesh.dx
        self.ndof = self.ncomp * mesh.n_elem * p1
        # Legendre Vandermonde for the modal shock sensor
        V = np.array([[_legendre(k, xi) for k in range(p1)] for xi in mesh.ref_nodes])
        self._vinv = np.linalg.inv(V)
        self._mode_energy = 2.0 / (2.0 * np.arange(p1) + 1.0)
        self.nu_art: Optional[np.ndarray] = None
        self._lu_cache: dict = {}
        self._lin_coeff_memo: dict = {}
        self._conv_memo = None
        self._unit_diffusion_csr = None
        self._last_dt = None
        self._mass_flat = np.tile(np.tile(self.mass_node, mesh.n_elem), self.ncomp)
        if mesh.bc == "dirichlet" and getattr(problem, "boundary_state", None) is None:
            raise ValueError("dirichlet mesh needs a problem with boundary_state(t)")

    # ------------------------------------------------------------------ layout

    def as_nodes(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u).reshape(self.ncomp, self.mesh.n_elem, self.p1)

    def flat(self, u3: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(u3).reshape(-1)

    def nodal_field(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Flat state from a callable x -> component values (vectorized)."""
        vals = np.asarray(fn(self.mesh.nodes_x))
        if vals.shape != (self.ncomp, self.mesh.n_elem, self.p1):
            raise ValueError("initial data has the wrong shape")
        return self.flat(vals)

    def total_integral(self, u: np.ndarray) -> np.ndarray:
        """Exact integral of each component over the domain."""
        u3 = self.as_nodes(u)
        return np.einsum("cep,p->c", u3, self.mass_node)

    def norm_l2(self, u: np.ndarray) -> float:
        u3 = self.as_nodes(u)
        return float(np.sqrt(np.einsum("cep,p->", u3**2, self.mass_node)))

    # ------------------------------------------------------------------ traces

    def _face_traces(self, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Minus/plus side traces at the n_elem + 1 faces; boundary entries
        default to the one-sided interior values."""
        lead = arr.shape[:-2]
        nf = self.mesh.n_elem + 1
        minus = np.empty(lead + (nf,))
        plus = np.empty(lead + (nf,))
        minus[..., 1:] = arr[..., :, -1]
        plus[..., :-1] = arr[..., :, 0]
        if self.mesh.bc == "periodic":
            minus[..., 0] = arr[..., -1, -1]
            plus[..., -1] = arr[..., 0, 0]
        else:
            minus[..., 0] = arr[..., 0, 0]
            plus[..., -1] = arr[..., -1, -1]
        return minus, plus

    def _face_weights(self) -> np.ndarray:
        w = np.full(self.mesh.n_elem + 1, 0.5)
        if self.mesh.bc == "dirichlet":
            w[0] = 1.0
            w[-1] = 1.0
        return w

    # -------------------------------------------------------------- convection

    def apply_convection(self, u: np.ndarray, t: float = 0.0) -> np.ndarray:
        memo = self._conv_memo
        if memo is not None and memo[0] is u and memo[1] == t:
            return memo[2]
        u3 = self.as_nodes(u)
        f = self.problem.flux(u3)
        vol = np.einsum("ik,cek->cei", self.DTW, f)
        um, up = self._face_traces(u3)
        if self.mesh.bc == "dirichlet":
            gl, gr = self.problem.boundary_state(t)
            um[:, 0] = gl
            up[:, -1] = gr
        fm = self.problem.flux(um)
        fp = self.problem.flux(up)
        lam = np.maximum(self.problem.max_speed(um), self.problem.max_speed(up))
        fhat = 0.5 * (fm + fp) - 0.5 * lam[None, :] * (up - um)
        vol[:, :, -1] -= fhat[:, 1:]
        vol[:, :, 0] += fhat[:, :-1]
        out = self.flat(vol * self.inv_mass[None, None, :])
        self._conv_memo = (u, t, out)
        return out

    # --------------------------------------------------------------- diffusion

    def _coeff_kind(self, coeff: Any) -> str:
        if coeff is None:
            return "none"
        if np.isscalar(coeff):
            return "const"
        coeff = np.asarray(coeff)
        if coeff.ndim == 2:
            return "scalar"
        if coeff.ndim == 4:
            return "matrix"
        raise ValueError(f"unrecognized coefficient of shape {coeff.shape}")

    def _unit_csr(self):
        # constant-coefficient application -inv(M) B[1] as a single matrix,
        # valid only without boundary data
        if self._unit_diffusion_csr is None:
            n = self.mesh.n_elem * self.p1
            B = self._assemble_stiffness(np.ones((self.mesh.n_elem, self.p1, 1, 1)), 1)
            inv_m = np.tile(self.inv_mass, self.mesh.n_elem)
            self._unit_diffusion_csr = (sp.diags(inv_m) @ (-B)).tocsr()
        return self._unit_diffusion_csr

    def apply_diffusion(self, coeff: Any, u: np.ndarray, t: float = 0.0) -> np.ndarray:
        kind = self._coeff_kind(coeff)
        if kind == "none" or (kind == "const" and coeff == 0.0):
            return np.zeros(self.ndof)
        if kind == "const" and self.mesh.bc == "periodic":
            flat = self._unit_csr() @ self.as_nodes(u).reshape(self.ncomp, -1).T
            return float(coeff) * flat.T.reshape(-1)
        u3 = self.as_nodes(u)
        two_dx = 2.0 / self.mesh.dx
        du = two_dx * np.einsum("ij,cej->cei", self.D, u3)
        if kind == "matrix":
            C = np.asarray(coeff)
            q = np.einsum("epij,jep->iep", C, du)
        else:
            if kind == "const":
                Cfield = np.full((self.mesh.n_elem, self.p1), float(coeff))
            else:
                Cfield = np.asarray(coeff)
            q = Cfield[None, :, :] * du
        B = np.einsum("ik,cek->cei", self.DTW, q)
        um, up = self._face_traces(u3)
        qm, qp = self._face_traces(q)
        if kind == "matrix":
            nf = self.mesh.n_elem + 1
            cm_, cp_ = self._face_traces(C.transpose(2, 3, 0, 1))
            Cm = np.moveaxis(cm_, -1, 0)
            Cp = np.moveaxis(cp_, -1, 0)
        else:
            cm_, cp_ = self._face_traces(Cfield[None, :, :])
            Cm = cm_[0]
            Cp = cp_[0]
        if self.mesh.bc == "dirichlet":
            gl, gr = self.problem.boundary_state(t)
            um[:, 0] = gl
            up[:, -1] = gr
            qm[:, 0] = qp[:, 0]
            qp[:, -1] = qm[:, -1]
            Cm[0] = Cp[0]
            Cp[-1] = Cm[-1]
        jump = um - up
        avgq = 0.5 * (qm + qp)
        wf = self._face_weights()
        if kind == "matrix":
            Cface = 0.5 * (Cm + Cp)
            pen = self.mu0 * np.einsum("fij,jf->if", Cface, jump)
            # adjoint term acts with each element's own coefficient rows
            lift_m = np.einsum("f,fij,jf->if", wf, Cm, jump)
            lift_p = np.einsum("f,fij,jf->if", wf, Cp, jump)
        else:
            Cface = 0.5 * (Cm + Cp)
            pen = self.mu0 * Cface[None, :] * jump
            lift_m = (wf * Cm)[None, :] * jump
            lift_p = (wf * Cp)[None, :] * jump
        G = -avgq + pen
        B[:, :, -1] += G[:, 1:]
        B[:, :, 0] -= G[:, :-1]
        B -= two_dx * lift_m[:, 1:, None] * self.D[-1][None, None, :]
        B -= two_dx * lift_p[:, :-1, None] * self.D[0][None, None, :]
        return self.flat(-B * self.inv_mass[None, None, :])

    # --------------------------------------------------------- rhs and sources

    def _physical_coeff(self, u3: np.ndarray) -> Any:
        base = self.problem.diffusion_coeff(u3)
        eps = self.nu_art
        if eps is None:
            return base
        kind = self._coeff_kind(base)
        if kind == "none":
            return eps[:, None] * np.ones((1, self.p1))
        if kind == "const":
            return float(base) + eps[:, None] * np.ones((1, self.p1))
        if kind == "scalar":
            return np.asarray(base) + eps[:, None]
        eye = np.eye(self.ncomp)
        return np.asarray(base) + eps[:, None, None, None] * eye[None, None, :, :]

    def apply_source(self, u: np.ndarray, t: float) -> np.ndarray:
        src = getattr(self.problem, "source", None)
        if src is None:
            return np.zeros(self.ndof)
        vals = src(self.mesh.nodes_x, t, self.as_nodes(u))
        if vals is None:
            return np.zeros(self.ndof)
        return self.flat(np.asarray(vals) + np.zeros((self.ncomp, 1, 1)))

    def eval_rhs(self, u: np.ndarray, t: float) -> np.ndarray:
        u3 = self.as_nodes(u)
        out = self.apply_convection(u, t).copy()
        coeff = self._physical_coeff(u3)
        if self._coeff_kind(coeff) != "none":
            out += self.apply_diffusion(coeff, u, t)
        src = getattr(self.problem, "source", None)
        if src is not None:
            vals = src(self.mesh.nodes_x, t, u3)
            if vals is not None:
                out += self.flat(np.asarray(vals) + np.zeros((self.ncomp, 1, 1)))
        if not np.all(np.isfinite(out)):
            bad = ~np.isfinite(out.reshape(self.ncomp, self.mesh.n_elem, self.p1))
            e = int(np.nonzero(bad.any(axis=(0, 2)))[0][0])
            raise SolverError(f"non-finite right-hand side in element {e}")
        return out

    # ------------------------------------------------- modified coefficient

    def modified_diffusion_matrix(self, u_b: np.ndarray, dt_m: float, scheme: str) -> Any:
        linear = getattr(self.problem, "is_linear", False)
        if linear:
            key = (dt_m, scheme)
            hit = self._lin_coeff_memo.get(key)
            if hit is not None:
                return hit
        u3 = self.as_nodes(u_b)
        phys = self._physical_coeff(u3)
        if scheme == "euler":
            coeff = phys
        else:
            jac = self.problem.conv_jacobian(u3)
            jkind = self._coeff_kind(jac)
            pkind = self._coeff_kind(phys)
            if jkind == "matrix":
                sq = 0.5 * dt_m * np.einsum("epij,epjk->epik", jac, jac)
                if pkind == "none":
                    coeff = sq
                elif pkind == "matrix":
                    coeff = sq + phys
                else:
                    field = (np.full((self.mesh.n_elem, self.p1), float(phys))
                             if pkind == "const" else np.asarray(phys))
                    coeff = sq + field[:, :, None, None] * np.eye(self.ncomp)
            else:
                jsq = (float(jac) ** 2 if jkind == "const" else np.asarray(jac) ** 2)
                half = 0.5 * dt_m * jsq
                if pkind == "none":
                    coeff = half
                elif pkind in ("const", "scalar"):
                    coeff = half + (float(phys) if pkind == "const" else np.asarray(phys))
                else:
                    hf = (np.full((self.mesh.n_elem, self.p1), float(half))
                          if np.isscalar(half) else half)
                    coeff = phys + hf[:, :, None, None] * np.eye(self.ncomp)
            if np.isscalar(coeff):
                coeff = float(coeff)
        if linear:
            self._lin_coeff_memo[(dt_m, scheme)] = coeff
        return coeff

    # ---------------------------------------------------------- implicit solve

    def _promote_matrix_field(self, coeff: Any) -> np.ndarray:
        kind = self._coeff_kind(coeff)
        ne, p1, nc = self.mesh.n_elem, self.p1, self.ncomp
        eye = np.eye(nc)
        if kind == "const":
            out = np.zeros((ne, p1, nc, nc))
            out[...] = float(coeff) * eye
            return out
        if kind == "scalar":
            return np.asarray(coeff)[:, :, None, None] * eye[None, None, :, :]
        if kind == "matrix":
            return np.asarray(coeff)
        raise ValueError("cannot assemble a zero coefficient")

    def _assemble_stiffness(self, Cmat: np.ndarray, ncomp: int) -> sp.csc_matrix:
        """Interior-penalty stiffness B[C] (no mass), flat dof ordering."""
        mesh = self.mesh
        ne, p1 = mesh.n_elem, self.p1
        nc = ncomp
        two_dx = 2.0 / mesh.dx
        w = mesh.ref_weights
        n = nc * ne * p1
        gid = (np.arange(nc)[:, None, None] * ne + np.arange(ne)[None, :, None]) * p1 \
            + np.arange(p1)[None, None, :]
        rows_list, cols_list, data_list = [], [], []

        wC = w[None, :, None, None] * Cmat
        V = two_dx * np.einsum("ki,ekab,kj->eaibj", self.D, wC, self.D)
        ga = gid.transpose(1, 0, 2)  # (ne, nc, p1)
        r = np.broadcast_to(ga[:, :, :, None, None], V.shape)
        c = np.broadcast_to(ga[:, None, None, :, :], V.shape)
        rows_list.append(r.ravel())
        cols_list.append(c.ravel())
        data_list.append(V.ravel())

        dlast = self.D[-1]
        dfirst = self.D[0]
        if mesh.bc == "periodic":
            pairs = [(e, (e + 1) % ne) for e in range(ne)]
        else:
            pairs = [(e, e + 1) for e in range(ne - 1)]
        npair = 2 * nc * p1
        for eL, eR in pairs:
            CL = Cmat[eL, -1]
            CR = Cmat[eR, 0]
            J = np.zeros((nc, npair))
            Q = np.zeros((nc, npair))
            QT = np.zeros((nc, npair))
            for a in range(nc):
                J[a, a * p1 + p1 - 1] = 1.0
                J[a, nc * p1 + a * p1] = -1.0
                for b in range(nc):
                    Q[a, b * p1:(b + 1) * p1] = 0.5 * two_dx * CL[a, b] * dlast
                    Q[a, nc * p1 + b * p1:nc * p1 + (b + 1) * p1] = \
                        0.5 * two_dx * CR[a, b] * dfirst
                    QT[a, b * p1:(b + 1) * p1] = 0.5 * two_dx * CL[b, a] * dlast
                    QT[a, nc * p1 + b * p1:nc * p1 + (b + 1) * p1] = \
                        0.5 * two_dx * CR[b, a] * dfirst
            muC = self.mu0 * 0.5 * (CL + CR)
            block = -(J.T @ Q + QT.T @ J) + J.T @ muC @ J
            ids = np.concatenate([gid[:, eL, :].ravel(), gid[:, eR, :].ravel()])
            rows_list.append(np.repeat(ids, npair))
            cols_list.append(np.tile(ids, npair))
            data_list.append(block.ravel())
        if mesh.bc == "dirichlet":
            nhalf = nc * p1
            for side in ("left", "right"):
                e = 0 if side == "left" else ne - 1
                Cb = Cmat[e, 0] if side == "left" else Cmat[e, -1]
                drow = dfirst if side == "left" else dlast
                sgn = -1.0 if side == "left" else 1.0
                endpos = 0 if side == "left" else p1 - 1
                J = np.zeros((nc, nhalf))
                Q = np.zeros((nc, nhalf))
                QT = np.zeros((nc, nhalf))
                for a in range(nc):
                    J[a, a * p1 + endpos] = sgn
                    for b in range(nc):
                        Q[a, b * p1:(b + 1) * p1] = two_dx * Cb[a, b] * drow
                        QT[a, b * p1:(b + 1) * p1] = two_dx * Cb[b, a] * drow
                block = -(J.T @ Q + QT.T @ J) + J.T @ (self.mu0 * Cb) @ J
                ids = gid[:, e, :].ravel()
                rows_list.append(np.repeat(ids, nhalf))
                cols_list.append(np.tile(ids, nhalf))
                data_list.append(block.ravel())
        B = sp.coo_matrix(
            (np.concatenate(data_list),
             (np.concatenate(rows_list), np.concatenate(cols_list))),
            shape=(n, n),
        )
        return B.tocsc()

    def assemble_implicit(self, coeff: Any, a: float) -> sp.csc_matrix:
        """The matrix M + a B[coeff] of the implicit substep equation."""
        Cmat = self._promote_matrix_field(coeff)
        B = self._assemble_stiffness(Cmat, self.ncomp)
        return (sp.diags(self._mass_flat) + a * B).tocsc()

    def _coeff_matches(self, coeff: Any, ref: Any) -> bool:
        if np.isscalar(coeff) and np.isscalar(ref):
            return float(coeff) == float(ref)
        return coeff is ref

    def implicit_solve(self, coeff: Any, a: float, rhs: np.ndarray,
                       t: float = 0.0) -> np.ndarray:
        if a == 0.0:
            return rhs
        rhs = np.asarray(rhs)
        m = self._mass_flat
        b = m * rhs.reshape(-1)
        if not b.any():
            return np.zeros_like(rhs)
        entry = self._lu_cache.get(a)
        if entry is None:
            entry = {"lu": splu(self.assemble_implicit(coeff, a)), "coeff": coeff}
            self._lu_cache[a] = entry
        x = entry["lu"].solve(b)
        if self.mesh.bc == "periodic" and self._coeff_matches(coeff, entry["coeff"]):
            return x.reshape(rhs.shape)
        bnorm = np.linalg.norm(b)
        refreshed = False
        for it in range(40):
            r = b - m * x + a * m * self.apply_diffusion(coeff, x, t)
            if np.linalg.norm(r) <= 1e-12 * bnorm:
                return x.reshape(rhs.shape)
            if it >= 4 and not refreshed:
                entry = {"lu": splu(self.assemble_implicit(coeff, a)), "coeff": coeff}
                self._lu_cache[a] = entry
                refreshed = True
            x = x + entry["lu"].solve(r)
        raise SolverError(
            f"implicit solve stalled after 40 iterations; "
            f"relative residual {np.linalg.norm(r) / bnorm:.2e}"
        )

    # ------------------------------------------------------ shock sensor

    def persson_viscosity(self, u: np.ndarray) -> np.ndarray:
        """Per-element artificial viscosity from the modal decay sensor."""
        if self.av is None:
            return np.zeros(self.mesh.n_elem)
        P = self.mesh.degree
        u3 = self.as_nodes(u)
        field = self.problem.sensor_component(u3)
        modal = field @ self._vinv.T
        energy = modal**2 * self._mode_energy[None, :]
        total = energy.sum(axis=1)
        top = energy[:, -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(total > 0.0, np.log10(np.maximum(top, 1e-300) / total), -np.inf)
        s0 = -4.0 * np.log10(P)
        kap = self.av.kappa_s
        lam_e = self.problem.max_speed(u3).max(axis=1)
        eps0 = self.av.c_s * self.mesh.dx * lam_e / P
        ramp = np.where(
            s < s0 - kap,
            0.0,
            np.where(s > s0 + kap, 1.0, 0.5 * (1.0 + np.sin(0.5 * np.pi * (s - s0) / kap))),
        )
        return eps0 * ramp

    # ------------------------------------------------------------ slab hooks

    def begin_slab(self, u0: np.ndarray, t0: float, dt: float) -> None:
        """Freeze the per-slab fields: sensor viscosity and solver caches."""
        if self.av is not None:
            self.nu_art = self.persson_viscosity(u0)
        if dt != self._last_dt:
            self._lu_cache.clear()
            self._last_dt = dt
        self._lin_coeff_memo.clear()
        self._conv_memo = None


def smooth_start(op: DGOperator, u: np.ndarray) -> np.ndarray:
    """Average the two trace values at every interior interface.

    Cheap interface smoothing applied to coarse-level starts before
    interpolation, so that jump-dominated fine-grid residuals do not feed
    spurious high modes into the first sweep.
    """
    u3 = op.as_nodes(u).copy()
    mean = 0.5 * (u3[:, :-1, -1] + u3[:, 1:, 0])
    u3[:, :-1, -1] = mean
    u3[:, 1:, 0] = mean
    if op.mesh.bc == "periodic":
        wrap = 0.5 * (u3[:, -1, -1] + u3[:, 0, 0])
        u3[:, -1, -1] = wrap
        u3[:, 0, 0] = wrap
    return op.flat(u3)


def max_wave_speed(op: DGOperator, u: np.ndarray) -> float:
    """Largest convective characteristic speed over all nodes."""
    return float(op.problem.max_speed(op.as_nodes(u)).max())
