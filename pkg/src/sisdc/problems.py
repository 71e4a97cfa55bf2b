"""Model problems: scalar conservation laws and the 1-D compressible flow system.

Each problem object carries the pointwise physics the discretization needs:
the convective flux f_c and its Jacobian A_c, the diffusion matrix A_d (the
diffusive flux is f_d = A_d u_x), a wave speed bound for numerical fluxes,
and optional source / boundary closures.  States are plain arrays with the
component axis first; shapes follow the caller.

Jacobian and diffusion-matrix return values use the coefficient forms the
discretization dispatches on: None (no diffusion), a python float (constant),
an (n_elem, p+1) scalar field, or an (n_elem, p+1, ncomp, ncomp) matrix field.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


# --------------------------------------------------------------------------
# scalar problems


class ConvectionDiffusion:
    """u_t + v u_x = nu u_xx, constant coefficients."""

    ncomp = 1
    is_linear = True
    source = None

    def __init__(self, speed: float = 1.0, nu: float = 0.0, boundary=None):
        if nu < 0:
            raise ValueError("diffusion coefficient must be nonnegative")
        self.speed = float(speed)
        self.nu = float(nu)
        self.boundary_state = boundary

    def flux(self, u):
        return self.speed * u

    def max_speed(self, u):
        return np.full(u.shape[1:], abs(self.speed))

    def conv_jacobian(self, u3):
        return self.speed

    def diffusion_coeff(self, u3):
        return self.nu if self.nu > 0 else None

    def sensor_component(self, u3):
        return u3[0]


class Burgers:
    """u_t + (u^2/2)_x = nu u_xx + s(x,t)."""

    ncomp = 1
    is_linear = False

    def __init__(self, nu: float = 0.0, source=None, boundary=None):
        if nu < 0:
            raise ValueError("diffusion coefficient must be nonnegative")
        self.nu = float(nu)
        self.source = source
        self.boundary_state = boundary

    def flux(self, u):
        return 0.5 * u * u

    def max_speed(self, u):
        return np.abs(u[0])

    def conv_jacobian(self, u3):
        # A_c is the state itself
        return np.array(u3[0])

    def diffusion_coeff(self, u3):
        return self.nu if self.nu > 0 else None

    def sensor_component(self, u3):
        return u3[0]


def manufactured_burgers_source(u_fn, ut_fn, ux_fn, uxx_fn, nu):
    """Source closure that makes u_fn an exact Burgers solution."""

    def src(x, t, u=None):
        return ut_fn(x, t) + u_fn(x, t) * ux_fn(x, t) - nu * uxx_fn(x, t)

    return src


# --------------------------------------------------------------------------
# compressible flow


def _primitive(gamma, u):
    rho = u[0]
    v = u[1] / rho
    p = (gamma - 1.0) * (u[2] - 0.5 * u[1] * v)
    return rho, v, p


@dataclass(frozen=True)
class EulerState:
    """Conservative state (rho, rho v, rho E) with derived quantities.

    Construction rejects non-physical data (nonpositive density or pressure).
    """

    rho: np.ndarray
    mom: np.ndarray
    ener: np.ndarray
    gamma: float = 1.4
    R_gas: float = 287.28

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))
        object.__setattr__(self, "mom", np.asarray(self.mom, dtype=float))
        object.__setattr__(self, "ener", np.asarray(self.ener, dtype=float))
        if np.any(self.rho <= 0):
            raise ValueError("non-physical state: density must be positive")
        if np.any(self.p <= 0):
            raise ValueError("non-physical state: pressure must be positive")

    @classmethod
    def from_primitive(cls, rho, v, p, gamma: float = 1.4, R_gas: float = 287.28):
        rho = np.asarray(rho, dtype=float)
        v = np.asarray(v, dtype=float)
        p = np.asarray(p, dtype=float)
        ener = p / (gamma - 1.0) + 0.5 * rho * v * v
        return cls(rho, rho * v, ener, gamma, R_gas)

    @property
    def v(self):
        return self.mom / self.rho

    @property
    def p(self):
        return (self.gamma - 1.0) * (self.ener - 0.5 * self.mom * self.mom / self.rho)

    @property
    def T(self):
        return self.p / (self.rho * self.R_gas)

    @property
    def a(self):
        return np.sqrt(self.gamma * self.p / self.rho)

    @property
    def enthalpy(self):
        # total specific enthalpy H = E + p/rho
        return (self.ener + self.p) / self.rho

    def conservative(self):
        return np.stack([self.rho, self.mom, self.ener])


class CompressibleFlow:
    """1-D compressible Navier-Stokes in conservative variables (rho, rho v, rho E).

    Ideal gas, constant dynamic viscosity eta and Prandtl number; Stokes
    hypothesis gives the 4/3 factor on the velocity diffusion.  eta = 0
    selects the Euler equations (A_d vanishes identically).
    """

    ncomp = 3
    is_linear = False
    source = None

    def __init__(self, gamma: float = 1.4, R_gas: float = 287.28,
                 eta: float = 0.0, Pr: float = 0.75, boundary=None):
        if gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        if Pr <= 0:
            raise ValueError("Prandtl number must be positive")
        if eta < 0:
            raise ValueError("viscosity must be nonnegative")
        self.gamma = float(gamma)
        self.R_gas = float(R_gas)
        self.eta = float(eta)
        self.Pr = float(Pr)
        self.boundary_state = boundary

    @property
    def viscous(self) -> bool:
        return self.eta > 0

    def flux(self, u):
        rho, v, p = _primitive(self.gamma, u)
        return np.stack([u[1], u[1] * v + p, v * (u[2] + p)])

    def max_speed(self, u):
        rho, v, p = _primitive(self.gamma, u)
        return np.abs(v) + np.sqrt(self.gamma * p / rho)

    def _checked_primitive(self, u3):
        rho, v, p = _primitive(self.gamma, u3)
        if np.any(rho <= 0) or np.any(p <= 0):
            raise ValueError("non-physical state: density and pressure must be positive")
        return rho, v, p

    def conv_jacobian(self, u3):
        g = self.gamma
        rho, v, p = self._checked_primitive(u3)
        H = (u3[2] + p) / rho
        ne, p1 = v.shape
        A = np.empty((ne, p1, 3, 3))
        A[..., 0, 0] = 0.0
        A[..., 0, 1] = 1.0
        A[..., 0, 2] = 0.0
        A[..., 1, 0] = 0.5 * (g - 3.0) * v * v
        A[..., 1, 1] = (3.0 - g) * v
        A[..., 1, 2] = g - 1.0
        A[..., 2, 0] = (0.5 * (g - 1.0) * v * v - H) * v
        A[..., 2, 1] = H - (g - 1.0) * v * v
        A[..., 2, 2] = g * v
        return A

    def diffusion_coeff(self, u3):
        if not self.viscous:
            return None
        g = self.gamma
        rho, v, p = self._checked_primitive(u3)
        E = u3[2] / rho
        nu = self.eta / rho
        gk = g * nu / self.Pr          # gamma * kappa, kappa = nu / Pr
        mu = (4.0 / 3.0) * nu
        ne, p1 = v.shape
        A = np.zeros((ne, p1, 3, 3))
        A[..., 1, 0] = -mu * v
        A[..., 1, 1] = mu
        A[..., 2, 0] = -(mu - gk) * v * v - gk * E
        A[..., 2, 1] = (mu - gk) * v
        A[..., 2, 2] = gk
        return A

    def sensor_component(self, u3):
        return u3[0]


# --------------------------------------------------------------------------
# exact solutions and initial data


def wave_packet_exact(nu, speed: float = 1.0,
                      wave_numbers=None, amplitudes=None, shifts=None):
    """Decaying multi-mode packet, exact for constant-coefficient
    convection-diffusion with periodic boundaries on a unit interval."""
    if wave_numbers is None:
        wave_numbers = 2.0 * np.pi * np.array([1.0, 3.0, 5.0, 7.0, 9.0, 12.0, 15.0])
    if amplitudes is None:
        amplitudes = np.array([1.00, 1.50, 1.80, 1.70, 1.50, 1.30, 1.15])
    if shifts is None:
        shifts = np.array([0.00, 0.05, 0.10, 0.15, 0.20, 0.30, 0.18])
    kap = np.asarray(wave_numbers, dtype=float)
    amp = np.asarray(amplitudes, dtype=float)
    sft = np.asarray(shifts, dtype=float)
    nu = float(nu)
    speed = float(speed)

    def exact(x, t=0.0):
        # stays polymorphic over dtype so complex-step derivatives work
        x = np.asarray(x)
        phase = kap.reshape((-1,) + (1,) * x.ndim) * (x[None] - sft.reshape((-1,) + (1,) * x.ndim) - speed * t)
        decay = np.exp(-(kap ** 2) * nu * t)
        return np.tensordot(amp * decay, np.sin(phase), axes=(0, 0))

    return exact


def burgers_front_exact(nu):
    """Viscous front u = 1 - tanh((x + 1/2 - t) / (2 nu)) moving at unit speed."""
    nu = float(nu)

    def exact(x, t=0.0):
        x = np.asarray(x)
        return 1.0 - np.tanh((x + 0.5 - t) / (2.0 * nu))

    return exact


def burgers_front_problem(nu):
    """Burgers problem with time-dependent trace data from the exact front."""
    exact = burgers_front_exact(nu)

    def boundary(t):
        return (np.array([exact(-1.0, t)]), np.array([exact(1.0, t)]))

    return Burgers(nu, boundary=boundary), exact


def acoustic_wave_init(gamma: float = 1.4, R_gas: float = 287.28,
                       mach: float = 0.1, p_inf: float = 1000.0,
                       T_inf: float = 300.0, amp_frac: float = 1e-2):
    """Right-running simple acoustic wave on a uniform mean flow.

    The velocity perturbation v' = amp_frac * a_inf * sin(2 pi x) rides on a
    mean flow at the given Mach number; temperature and pressure follow the
    isentropic simple-wave relations, so the perturbation advects at v + a.
    Returns (init, a_inf) with init(x) -> conservative state array.
    """
    a_inf = np.sqrt(gamma * R_gas * T_inf)
    vhat = amp_frac * a_inf

    def init(x):
        x = np.asarray(x, dtype=float)
        vp = vhat * np.sin(2.0 * np.pi * x)
        T = (a_inf + 0.5 * (gamma - 1.0) * vp) ** 2 / (gamma * R_gas)
        p = p_inf * (T / T_inf) ** (gamma / (gamma - 1.0))
        v = mach * a_inf + vp
        rho = p / (R_gas * T)
        return EulerState.from_primitive(rho, v, p, gamma, R_gas).conservative()

    return init, float(a_inf)


def sod_init(gamma: float = 1.4, split: float = 0.5):
    """Standard shock-tube data: (rho, v, p) = (1, 0, 1) left of the split,
    (0.125, 0, 0.1) right of it."""

    def init(x):
        x = np.asarray(x, dtype=float)
        left = x < split
        rho = np.where(left, 1.0, 0.125)
        p = np.where(left, 1.0, 0.1)
        v = np.zeros_like(rho)
        return EulerState.from_primitive(rho, v, p, gamma).conservative()

    return init


# --------------------------------------------------------------------------
# exact Riemann solver (used as an independent reference for shock-tube runs)


class RiemannExact:
    """Exact solution of the 1-D Euler Riemann problem for an ideal gas.

    Star-region pressure from the standard two-branch pressure function
    (rarefaction / shock per side), solved with a bracketing root finder;
    sample(xi) evaluates the self-similar solution at xi = x/t.
    """

    def __init__(self, left, right, gamma: float = 1.4):
        self.gamma = float(gamma)
        self.rho_l, self.v_l, self.p_l = (float(q) for q in left)
        self.rho_r, self.v_r, self.p_r = (float(q) for q in right)
        if min(self.rho_l, self.rho_r, self.p_l, self.p_r) <= 0:
            raise ValueError("non-physical state: density and pressure must be positive")
        g = self.gamma
        self.a_l = np.sqrt(g * self.p_l / self.rho_l)
        self.a_r = np.sqrt(g * self.p_r / self.rho_r)
        # vacuum forms if the rarefactions separate faster than the gas closes
        if 2.0 * (self.a_l + self.a_r) / (g - 1.0) <= self.v_r - self.v_l:
            raise ValueError("initial data generates vacuum")
        self.p_star, self.v_star = self._solve_star()

    def _side(self, p, rho_k, p_k, a_k):
        """Velocity change f_k(p) across the wave on one side and its sign
        convention follow the pressure-function formulation."""
        g = self.gamma
        if p > p_k:  # shock branch
            A = 2.0 / ((g + 1.0) * rho_k)
            B = (g - 1.0) / (g + 1.0) * p_k
            return (p - p_k) * np.sqrt(A / (p + B))
        # rarefaction branch
        return 2.0 * a_k / (g - 1.0) * ((p / p_k) ** ((g - 1.0) / (2.0 * g)) - 1.0)

    def _solve_star(self):
        dv = self.v_r - self.v_l

        def f(p):
            return (self._side(p, self.rho_l, self.p_l, self.a_l)
                    + self._side(p, self.rho_r, self.p_r, self.a_r) + dv)

        lo = 1e-12 * min(self.p_l, self.p_r)
        hi = max(self.p_l, self.p_r)
        while f(hi) < 0:
            hi *= 2.0
        p_star = brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16)
        v_star = 0.5 * (self.v_l + self.v_r) + 0.5 * (
            self._side(p_star, self.rho_r, self.p_r, self.a_r)
            - self._side(p_star, self.rho_l, self.p_l, self.a_l))
        return p_star, v_star

    def shock_speed_right(self):
        """Speed of the right-going shock; valid when p_star > p_r."""
        g = self.gamma
        if self.p_star <= self.p_r:
            raise ValueError("right wave is a rarefaction")
        return self.v_r + self.a_r * np.sqrt(
            (g + 1.0) / (2.0 * g) * self.p_star / self.p_r + (g - 1.0) / (2.0 * g))

    def shock_speed_left(self):
        g = self.gamma
        if self.p_star <= self.p_l:
            raise ValueError("left wave is a rarefaction")
        return self.v_l - self.a_l * np.sqrt(
            (g + 1.0) / (2.0 * g) * self.p_star / self.p_l + (g - 1.0) / (2.0 * g))

    def _sample_one(self, xi):
        g = self.gamma
        ps, vs = self.p_star, self.v_star
        if xi <= vs:  # left of the contact
            rho_k, v_k, p_k, a_k, sgn = self.rho_l, self.v_l, self.p_l, self.a_l, 1.0
        else:
            rho_k, v_k, p_k, a_k, sgn = self.rho_r, self.v_r, self.p_r, self.a_r, -1.0
        if ps > p_k:  # shock on this side
            ratio = ps / p_k
            gm = (g - 1.0) / (g + 1.0)
            rho_s = rho_k * (ratio + gm) / (gm * ratio + 1.0)
            speed = v_k - sgn * a_k * np.sqrt((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g))
            if sgn * (xi - speed) >= 0:
                return rho_s, vs, ps
            return rho_k, v_k, p_k
        # rarefaction on this side
        a_s = a_k + sgn * 0.5 * (g - 1.0) * (v_k - vs)
        head = v_k - sgn * a_k
        tail = vs - sgn * a_s
        if sgn * (xi - head) <= 0:
            return rho_k, v_k, p_k
        if sgn * (xi - tail) >= 0:
            rho_s = rho_k * (ps / p_k) ** (1.0 / g)
            return rho_s, vs, ps
        # inside the fan
        v = (2.0 / (g + 1.0)) * (sgn * a_k + 0.5 * (g - 1.0) * v_k + xi)
        a = sgn * (v - xi)
        rho = rho_k * (a / a_k) ** (2.0 / (g - 1.0))
        p = p_k * (a / a_k) ** (2.0 * g / (g - 1.0))
        return rho, v, p

    def sample(self, xi):
        """Primitive state (rho, v, p) at similarity coordinate xi = x/t."""
        xi = np.asarray(xi, dtype=float)
        flat = np.atleast_1d(xi).ravel()
        out = np.array([self._sample_one(float(z)) for z in flat]).T
        out = out.reshape((3,) + np.atleast_1d(xi).shape)
        if xi.ndim == 0:
            return out[:, 0]
        return out

    def conservative(self, x, t, x0: float = 0.0):
        """Conservative state on a grid at time t > 0, wave origin at x0."""
        rho, v, p = self.sample((np.asarray(x, dtype=float) - x0) / t)
        return EulerState.from_primitive(rho, v, p, self.gamma).conservative()
