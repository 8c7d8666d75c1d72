"""The evolution system, its coefficient matrices and its linearization.

The upper half (S, P, U1, U2, U3) is written as ``A^mu(V) d_mu W = b`` with
5x5 matrices; the lower half is the first-order scalar wave system for
(phi, psi).  All kernels broadcast over trailing grid axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eos import EosSpec
from .errors import GridMismatch, OrderTooHigh
from .field import Grid, MultiIndex, derivative_alpha, write_csv
from .state import PHI_, U_, as_array, complete_state, four_velocity

EQUATION_NAMES = ("entropy", "pressure", "momentum1", "momentum2", "momentum3",
                  "wave", "curl1", "curl2", "curl3", "potential")


@dataclass
class CoeffMatrices:
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray

    def __getitem__(self, mu: int) -> np.ndarray:
        return (self.A0, self.A1, self.A2, self.A3)[mu]


def coeff_matrices(V, eos: EosSpec | None = None) -> CoeffMatrices:
    """A^0 .. A^3 at a state (or state field); each has shape (5, 5, ...)."""
    V = as_array(V)
    d = complete_state(V, eos)
    Uup = four_velocity(V)
    RP = d.R + V[1]
    tail = V.shape[1:]
    mats = []
    for mu in range(4):
        A = np.zeros((5, 5) + tail)
        A[0, 0] = Uup[mu]
        A[1, 1] = Uup[mu]
        if mu == 0:
            A[1, 2:] = d.Q * V[U_] / d.U0
        else:
            A[1, 1 + mu] = d.Q
        A[2:, 1] = d.Pi[mu, 1:]
        for j in range(3):
            A[2 + j, 2 + j] = RP * Uup[mu]
        mats.append(A)
    return CoeffMatrices(*mats)


def det_a0(V, eos: EosSpec | None = None):
    """Closed-form determinant of A^0: (U0)^3 (R+P)^2 [(R+P)(U0)^2 - Q|U|^2]."""
    V = as_array(V)
    d = complete_state(V, eos)
    RP = d.R + V[1]
    U2 = np.sum(V[U_] ** 2, axis=0)
    return d.U0**3 * RP**2 * (RP * d.U0**2 - d.Q * U2)


def det_a0_short(V, eos: EosSpec | None = None):
    """The short closed form -Q (R+P)^2 (U0)^3.

    It does not agree with the determinant of A^0 as assembled here; kept so
    the discrepancy stays measurable.
    """
    V = as_array(V)
    d = complete_state(V, eos)
    return -d.Q * (d.R + V[1]) ** 2 * d.U0**3


def apply_a0_inverse(V, rhs, eos: EosSpec | None = None, derived=None):
    """Solve A^0(V) x = rhs by block elimination; rhs has shape (5, ...)."""
    V = as_array(V)
    d = derived if derived is not None else complete_state(V, eos)
    rhs = np.asarray(rhs, dtype=float)
    U = V[U_]
    U0 = d.U0
    D = (d.R + V[1]) * U0
    c = d.Q * U / U0           # row P, columns U^j
    pi = U0 * U                # Pi^{0j}
    x = np.empty(np.broadcast(rhs, V[:5]).shape)
    x[0] = rhs[0] / U0
    rU = rhs[2:]
    denom = U0 - np.sum(c * pi, axis=0) / D
    x[1] = (rhs[1] - np.sum(c * rU, axis=0) / D) / denom
    x[2:] = (rU - pi * x[1]) / D
    return x


def apply_ak(V, k: int, dW, eos: EosSpec | None = None, derived=None):
    """A^k(V) dW for spatial k in 1..3, without forming the matrix."""
    V = as_array(V)
    d = derived if derived is not None else complete_state(V, eos)
    Uk = V[1 + k]
    RP = d.R + V[1]
    out = np.empty(np.broadcast(dW, V[:5]).shape)
    out[0] = Uk * dW[0]
    out[1] = Uk * dW[1] + d.Q * dW[1 + k]
    for j in range(3):
        out[2 + j] = d.Pi[k, 1 + j] * dW[1] + RP * Uk * dW[2 + j]
    return out


# ---------------------------------------------------------------------------
# inhomogeneous terms

@dataclass
class InhomTerms:
    b: np.ndarray  # (f, g, h1, h2, h3)
    l: np.ndarray  # (l0, l1, l2, l3, l4)

    @property
    def f(self):
        return self.b[0]

    @property
    def g(self):
        return self.b[1]

    @property
    def h(self):
        return self.b[2:5]

    @classmethod
    def zeros(cls, shape=()) -> "InhomTerms":
        return cls(np.zeros((5,) + tuple(shape)), np.zeros((5,) + tuple(shape)))


def _u_dot_psi(V, U0):
    return U0 * V[6] + np.sum(V[U_] * V[7:10], axis=0)


def inhom_linearization(V, kappa: float, eos: EosSpec | None = None, derived=None) -> InhomTerms:
    """Sources of the system linearized about V, evaluated pointwise."""
    V = as_array(V)
    d = derived if derived is not None else complete_state(V, eos)
    P = V[1]
    Upsi = _u_dot_psi(V, d.U0)
    b = np.zeros((5,) + V.shape[1:])
    b[1] = (4.0 * P - 3.0 * d.Q) * Upsi
    b[2:] = (3.0 * P - d.R) * (V[U_] * Upsi + V[7:10])  # Pi^{mu j} psi_mu
    l = np.zeros((5,) + V.shape[1:])
    l[0] = kappa**2 * V[PHI_] + d.R - 3.0 * P
    l[4] = V[6]
    return InhomTerms(b, l)


# ---------------------------------------------------------------------------
# right-hand sides and residuals

def time_derivative_eov(V_bg, dV_spatial, inhom: InhomTerms, eos: EosSpec | None = None,
                        derived=None):
    """d_0 of a variation solving the EOV, from its spatial derivatives.

    ``dV_spatial`` has shape (3, 10, ...): d_k of the variation.
    """
    V_bg = as_array(V_bg)
    d = derived if derived is not None else complete_state(V_bg, eos)
    dV = np.asarray(dV_spatial, dtype=float)
    rhs = np.array(inhom.b, dtype=float, copy=True) + np.zeros((5,) + V_bg.shape[1:])
    for k in range(3):
        if np.any(dV[k, :5]):
            rhs -= apply_ak(V_bg, k + 1, dV[k, :5], derived=d)
    out = np.empty((10,) + np.broadcast(rhs[0], dV[0, 0]).shape)
    out[:5] = apply_a0_inverse(V_bg, rhs, derived=d)
    out[6] = dV[0, 7] + dV[1, 8] + dV[2, 9] - inhom.l[0]
    for j in range(3):
        out[7 + j] = dV[j, 6] + inhom.l[1 + j]
    out[PHI_] = inhom.l[4]
    return out


def time_derivative_nonlinear(V, dV_spatial, kappa: float, eos: EosSpec | None = None):
    V = as_array(V)
    d = complete_state(V, eos)
    return time_derivative_eov(V, dV_spatial, inhom_linearization(V, kappa, derived=d), derived=d)


def _lhs_eov(V_bg, dV, d):
    """Left sides of the ten scalar equations; dV has shape (4, 10, ...)."""
    mats = coeff_matrices(V_bg)
    out = np.zeros((10,) + np.broadcast(dV[0, 0], V_bg[0]).shape)
    for mu in range(4):
        out[:5] += np.einsum("ij...,j...->i...", mats[mu], dV[mu, :5])
    out[5] = -dV[0, 6] + dV[1, 7] + dV[2, 8] + dV[3, 9]
    for j in range(3):
        out[6 + j] = dV[0, 7 + j] - dV[1 + j, 6]
    out[9] = dV[0, PHI_]
    return out


def residual_eov(V_bg, dV, inhom: InhomTerms, eos: EosSpec | None = None):
    """Left minus right side of the EOV, in equation order (see EQUATION_NAMES)."""
    V_bg = as_array(V_bg)
    d = complete_state(V_bg, eos)
    dV = np.asarray(dV, dtype=float)
    out = _lhs_eov(V_bg, dV, d)
    out[:5] -= inhom.b
    out[5] -= inhom.l[0]
    out[6:9] -= inhom.l[1:4]
    out[9] -= inhom.l[4]
    return out


def residual_nonlinear(V, dV, kappa: float, eos: EosSpec | None = None):
    """Left minus right side of the nonlinear system; dV is (4, 10, ...) of d_mu V."""
    V = as_array(V)
    return residual_eov(V, dV, inhom_linearization(V, kappa, eos), eos)


def residual(kind: str, state, derivs, inhom: InhomTerms | None = None, kappa: float = 1.0,
             eos: EosSpec | None = None):
    """Pointwise residual of either the nonlinear system or the EOV.

    ``state`` is V for ``kind="nonlinear"`` and ``V_bg`` (or ``(V_bg, V_dot)``)
    for ``kind="eov"``; ``derivs`` holds the first derivatives with shape
    (4, 10, ...), time derivative first.
    """
    if kind == "eov" and isinstance(state, tuple):
        state = state[0]
    V = as_array(state)
    derivs = np.asarray(derivs, dtype=float)
    if derivs.shape[:2] != (4, 10) or derivs.shape[2:] != V.shape[1:]:
        raise GridMismatch(f"derivative shape {derivs.shape} incompatible with state {V.shape}")
    if kind == "nonlinear":
        return residual_nonlinear(V, derivs, kappa, eos)
    if kind == "eov":
        if inhom is None:
            inhom = InhomTerms.zeros(V.shape[1:])
        return residual_eov(V, derivs, inhom, eos)
    raise ValueError(f"unknown residual kind {kind!r}")


def write_residual_csv(path, grid: Grid, res) -> None:
    write_csv(path, grid, res, names=EQUATION_NAMES)


# ---------------------------------------------------------------------------
# differentiated system

@dataclass
class DifferentiatedInhom:
    b_alpha: np.ndarray
    k_alpha: np.ndarray
    alpha: MultiIndex


def _a0inv_ak_dw(V_bg, dW_spatial, d):
    out = 0.0
    for k in range(3):
        if np.any(dW_spatial[k]):
            out = out + apply_a0_inverse(V_bg, apply_ak(V_bg, k + 1, dW_spatial[k], derived=d), derived=d)
    return out + np.zeros((5,) + V_bg.shape[1:])


def _apply_a0(V_bg, x, d):
    mats = coeff_matrices(V_bg)
    return np.einsum("ij...,j...->i...", mats.A0, x)


def differentiated_inhom(V_bg, W_dot, b, alpha: MultiIndex, grid: Grid, N_d: int = 3,
                         scheme: str = "spectral", eos: EosSpec | None = None) -> DifferentiatedInhom:
    """b_alpha = A0 d_alpha(A0^{-1} b) + k_alpha for the alpha-differentiated EOV."""
    alpha.check(N_d)
    V_bg = as_array(V_bg)
    W_dot = np.asarray(W_dot, dtype=float)[:5]
    b = np.asarray(b.b if isinstance(b, InhomTerms) else b, dtype=float)
    if alpha.order == 0:
        return DifferentiatedInhom(b.copy(), np.zeros_like(b), alpha)
    if alpha.order > N_d:
        raise OrderTooHigh(f"|alpha|={alpha.order} > N_d={N_d}")
    d = complete_state(V_bg, eos)
    dal = lambda f: derivative_alpha(f, grid, alpha, scheme)  # noqa: E731
    axes = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]

    def dx(f, k):
        return derivative_alpha(f, grid, MultiIndex(axes[k]), scheme)

    dW = np.stack([dx(W_dot, k) for k in range(3)])
    W_a = dal(W_dot)
    dW_a = np.stack([dx(W_a, k) for k in range(3)])
    bracket = _a0inv_ak_dw(V_bg, dW_a, d) - dal(_a0inv_ak_dw(V_bg, dW, d))
    k_alpha = _apply_a0(V_bg, bracket, d)
    b_alpha = _apply_a0(V_bg, dal(apply_a0_inverse(V_bg, b, derived=d)), d) + k_alpha
    return DifferentiatedInhom(b_alpha, k_alpha, alpha)
