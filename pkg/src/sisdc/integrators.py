"""Substeppers and the operator interface they are written against.

A time slab [t_n, t_n + dt] carries M collocation nodes. Marching from node
m-1 to node m uses one of three substep formulas, all sharing the shape

    u_m = base + H(..., u_m)

with H linear in its last (implicit) argument:

    euler:  H = dt_m * (conv(u_a) + D[A_d(u_a)] u_b)
    si:     H = dt_m * (conv(u_a) + D[Abar(u_b)] u_c)

where conv(u) is the discrete -d/dx f_c(u), D[A] u the discrete
d/dx (A d/dx u), and Abar(u) = (dt_m / 2) A_c(u)^2 + A_d(u) the modified
diffusion matrix that absorbs the leading convective stiffness into the
implicit part. Sources never enter H; they only appear in the full
right-hand side used for the quadrature terms.
"""

from __future__ import annotations

from typing import Any, Literal, Protocol

import numpy as np

Scheme = Literal["euler", "si1", "si2"]


class OperatorContext(Protocol):
    """What a spatial discretization must provide to the time integrators.

    States are flat arrays. The diffusion coefficient object returned by
    modified_diffusion_matrix is opaque to the integrators; it is only ever
    passed back into apply_diffusion and implicit_solve.
    """

    def eval_rhs(self, u: np.ndarray, t: float) -> np.ndarray:
        """Full right-hand side f(u, t), sources included."""
        ...

    def apply_convection(self, u: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Discrete -d/dx f_c(u); t only matters for time-dependent boundary
        data."""
        ...

    def modified_diffusion_matrix(self, u: np.ndarray, dt_m: float, scheme: Scheme) -> Any:
        """Abar(u) for si schemes; the physical A_d(u) for euler."""
        ...

    def apply_diffusion(self, coeff: Any, u: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Discrete d/dx (coeff d/dx u) for a previously built coefficient."""
        ...

    def implicit_solve(self, coeff: Any, a: float, rhs: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Solve (Id - a D[coeff]) u = rhs; a = 0 must return rhs exactly."""
        ...

    def apply_source(self, u: np.ndarray, t: float) -> np.ndarray:
        """Source term contribution, zero for homogeneous problems."""
        ...


def h_euler(ctx: OperatorContext, coeff: Any, u_a: np.ndarray, u_b: np.ndarray, dt_m: float,
            t_a: float = 0.0, t_b: float = 0.0) -> np.ndarray:
    """Explicit evaluation of the euler substep operator.

    coeff must be modified_diffusion_matrix(u_a, dt_m, "euler"), i.e. the
    physical diffusion matrix frozen at u_a.
    """
    return dt_m * (ctx.apply_convection(u_a, t_a) + ctx.apply_diffusion(coeff, u_b, t_b))


def h_si(ctx: OperatorContext, coeff: Any, u_a: np.ndarray, u_c: np.ndarray, dt_m: float,
         t_a: float = 0.0, t_c: float = 0.0) -> np.ndarray:
    """Explicit evaluation of the semi-implicit substep operator.

    coeff must be modified_diffusion_matrix(u_b, dt_m, "si..."), frozen at the
    coefficient state u_b.
    """
    return dt_m * (ctx.apply_convection(u_a, t_a) + ctx.apply_diffusion(coeff, u_c, t_c))


def delta_h(h_new: np.ndarray, h_old: np.ndarray) -> np.ndarray:
    """Difference of substep operators between consecutive iterates.

    Exactly zero (bitwise) when the two evaluations coincide.
    """
    if h_new is h_old:
        return np.zeros_like(h_new)
    return h_new - h_old


class DahlquistContext:
    """Scalar linear test operator split into convective and diffusive parts.

        du/dt = lam_ex u + lam_im u

    lam_ex plays the role of the convective term (imaginary for a pure wave),
    lam_im the diffusive one. A_c is lam_ex / i by analogy with a wave speed,
    so the modified coefficient is lam_im + (dt_m / 2) lam_ex^2 in complex
    arithmetic. Both rates may be arrays: every state is then a matching
    array and a whole grid of test problems integrates in one run.
    """

    def __init__(self, lam_ex, lam_im):
        self.lam_ex = np.asarray(lam_ex, dtype=complex)
        self.lam_im = np.asarray(lam_im, dtype=complex)
        self.shape = np.broadcast(self.lam_ex, self.lam_im).shape

    def initial_state(self) -> np.ndarray:
        return np.ones(self.shape, dtype=complex)

    def eval_rhs(self, u, t):
        return (self.lam_ex + self.lam_im) * u

    def apply_convection(self, u, t=0.0):
        return self.lam_ex * u

    def modified_diffusion_matrix(self, u, dt_m, scheme):
        if scheme == "euler":
            return self.lam_im
        return self.lam_im + 0.5 * dt_m * self.lam_ex**2

    def apply_diffusion(self, coeff, u, t=0.0):
        return coeff * u

    def implicit_solve(self, coeff, a, rhs, t=0.0):
        if a == 0.0:
            return rhs
        return rhs / (1.0 - a * coeff)

    def apply_source(self, u, t):
        return np.zeros_like(u)


def tvd_rk3_step(ctx: OperatorContext, u: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One step of the three-stage third-order TVD Runge-Kutta method."""
    u1 = u + dt * ctx.eval_rhs(u, t)
    u2 = 0.75 * u + 0.25 * (u1 + dt * ctx.eval_rhs(u1, t + dt))
    return u / 3.0 + 2.0 / 3.0 * (u2 + dt * ctx.eval_rhs(u2, t + 0.5 * dt))
