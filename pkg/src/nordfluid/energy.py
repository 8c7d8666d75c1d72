"""Energy currents for variations about a background state.

The current is quadratic in the variation, ``xi_mu J^mu = Vdot^T M(xi) Vdot``
with ``M(xi) = xi_mu B^mu``; the ``B^mu`` are assembled explicitly so the
positivity claims can be checked through eigenvalues.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .eos import EosSpec, weighted_energy_grad, weighted_stiffness_grad
from .errors import BoxTouchesBoundary, InadmissibleState
from .field import Grid, MultiIndex, derivative_alpha
from .state import U_, AdmissibleBox, _eos, as_array, complete_state, four_velocity
from .system import InhomTerms


@dataclass
class CurrentValue:
    J0: np.ndarray
    J: np.ndarray  # (3, ...)


@dataclass
class FormMatrix:
    M: np.ndarray


def _fluid(V_bg, eos):
    V_bg = as_array(V_bg)
    d = complete_state(V_bg, eos)
    if np.any(d.Q <= 0) or np.any(d.R + V_bg[1] <= 0):
        raise InadmissibleState("singular current: Q or R + P not positive")
    return V_bg, d


def current_matrices(V_bg, eos: EosSpec | None = None) -> np.ndarray:
    """B^mu with J^mu = Vdot^T B^mu Vdot; shape (4, 10, 10)."""
    V_bg, d = _fluid(V_bg, eos)
    if V_bg.ndim != 1:
        raise ValueError("current_matrices takes a single state")
    Uup = four_velocity(V_bg)
    U = V_bg[U_]
    U0, Q, RP = float(d.U0), float(d.Q), float(d.R + V_bg[1])
    proj = np.eye(3) - np.outer(U, U) / U0**2
    B = np.zeros((4, 10, 10))
    for mu in range(4):
        B[mu, 0, 0] = Uup[mu]
        B[mu, 1, 1] = Uup[mu] / Q
        B[mu, 2:5, 2:5] = RP * Uup[mu] * proj
    B[0, 1, 2:5] = B[0, 2:5, 1] = U / U0
    for i in range(5, 10):
        B[0, i, i] = 0.5
    for j in range(3):
        B[1 + j, 1, 2 + j] = B[1 + j, 2 + j, 1] = 1.0
        B[1 + j, 6, 7 + j] = B[1 + j, 7 + j, 6] = -0.5
    return B


def current_form(V_bg, xi, eos: EosSpec | None = None) -> FormMatrix:
    B = current_matrices(V_bg, eos)
    return FormMatrix(np.einsum("m,mij->ij", np.asarray(xi, dtype=float), B))


def current_value(V_bg, V_dot, eos: EosSpec | None = None) -> CurrentValue:
    """J^0 and J^j for a variation; broadcasts over trailing grid axes."""
    V_bg, d = _fluid(V_bg, eos)
    Vd = np.asarray(V_dot, dtype=float)
    U = V_bg[U_]
    U0, Q, RP = d.U0, d.Q, d.R + V_bg[1]
    Sd, Pd, Ud = Vd[0], Vd[1], Vd[2:5]
    UUd = np.sum(U * Ud, axis=0)
    bracket = np.sum(Ud * Ud, axis=0) - UUd**2 / U0**2
    J0 = (U0 * Sd**2 + U0 / Q * Pd**2 + 2.0 * UUd / U0 * Pd + RP * U0 * bracket
          + 0.5 * np.sum(Vd[5:10] ** 2, axis=0))
    J = np.stack([U[j] * Sd**2 + U[j] / Q * Pd**2 + 2.0 * Ud[j] * Pd + RP * U[j] * bracket
                  - Vd[6] * Vd[7 + j] for j in range(3)])
    return CurrentValue(J0, J)


def higher_order_current(V_bg, V_dot, alpha: MultiIndex, grid: Grid, scheme: str = "spectral",
                         eos: EosSpec | None = None) -> CurrentValue:
    """Current of the differentiated variation d_alpha Vdot about the same background."""
    return current_value(V_bg, derivative_alpha(V_dot, grid, alpha, scheme), eos)


# ---------------------------------------------------------------------------
# uniform positivity over a box

@dataclass
class UniformConstant:
    C_box: float
    lam_min: float
    lam_max: float
    argmin: np.ndarray
    samples: int
    states: np.ndarray = field(repr=False, default=None)


def _box_samples(box: AdmissibleBox, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo, hi = box.lower, box.upper
    # vertices over the components the form depends on (S, P, U, phi), then random fill
    corners = []
    for bits in range(2**6):
        v = 0.5 * (lo + hi)
        for i in range(6):
            v[i] = hi[i] if (bits >> i) & 1 else lo[i]
        corners.append(v)
    corners.append(0.5 * (lo + hi))
    corners = np.array(corners)
    if np.all(lo == hi):
        return lo[None].copy()
    rand = lo + (hi - lo) * rng.random((max(count - len(corners), 0), 10))
    return np.vstack([corners, rand])


def uniform_constant(box: AdmissibleBox, sampling: int = 1000, seed: int = 0,
                     eos: EosSpec | None = None) -> UniformConstant:
    """Sampled C with C |Vdot|^2 <= J^0 <= |Vdot|^2 / C over the box."""
    if box.lower[0] <= 0 or box.lower[1] <= 0:
        raise BoxTouchesBoundary("box must stay strictly inside S > 0, P > 0")
    eos = _eos(eos)
    states = _box_samples(box, sampling, seed)
    best, lmin_all, lmax_all, arg = np.inf, np.inf, 0.0, states[0]
    for V in states:
        lam = np.linalg.eigvalsh(current_matrices(V, eos)[0])
        c = min(lam[0], 1.0 / lam[-1])
        lmin_all = min(lmin_all, lam[0])
        lmax_all = max(lmax_all, lam[-1])
        if c < best:
            best, arg = c, V
    C = float(min(max(best, np.finfo(float).tiny), np.nextafter(1.0, 0.0)))
    return UniformConstant(C, float(lmin_all), float(lmax_all), arg, len(states), states)


def write_uniform_csv(path, rows) -> None:
    """rows: iterable of (AdmissibleBox, UniformConstant)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["box_lower", "box_upper", "C_box", "lam_min", "lam_max", "argmin"])
        for box, uc in rows:
            fmt = lambda a: ";".join(f"{x:.12g}" for x in a)  # noqa: E731
            w.writerow([fmt(box.lower), fmt(box.upper), f"{uc.C_box:.12g}", f"{uc.lam_min:.12g}",
                        f"{uc.lam_max:.12g}", fmt(uc.argmin)])


# ---------------------------------------------------------------------------
# divergence identity

def divergence_rhs(V_bg, dV_bg, V_dot, inhom: InhomTerms, eos: EosSpec | None = None):
    """Derivative-free expression for d_mu J^mu when Vdot solves the EOV.

    ``dV_bg`` has shape (4, 10, ...) and holds d_mu of the background.
    """
    eos = _eos(eos)
    V_bg, d = _fluid(V_bg, eos)
    dV = np.asarray(dV_bg, dtype=float)
    Vd = np.asarray(V_dot, dtype=float)
    U = V_bg[U_]
    U0, Q, R, P = d.U0, d.Q, d.R, V_bg[1]
    RP = R + P
    Uup = four_velocity(V_bg)

    def grad(partials, mu):
        return sum(p * dV[mu, i] for p, i in zip(partials, (0, 1, 5)))

    dR = weighted_energy_grad(eos, V_bg[0], P, V_bg[5])
    dQ = weighted_stiffness_grad(eos, V_bg[0], P, V_bg[5])
    # d_mu U^nu for nu = 0..3, indexed [mu][nu]
    dU = [np.concatenate([(np.sum(U * dV[mu, 2:5], axis=0) / U0)[None], dV[mu, 2:5]])
          for mu in range(4)]
    divU = sum(dU[mu][mu] for mu in range(4))
    UdQ = sum(Uup[mu] * grad(dQ, mu) for mu in range(4))
    UdRP = sum(Uup[mu] * (grad(dR, mu) + dV[mu, 1]) for mu in range(4))
    div_U_over_Q = divU / Q - UdQ / Q**2
    div_RPU = UdRP + RP * divU

    def d_ratio(mu):  # d_mu (U_j / U0), shape (3, ...)
        return dU[mu][1:] / U0 - U * dU[mu][0] / U0**2

    Sd, Pd, Ud = Vd[0], Vd[1], Vd[2:5]
    UUd = np.sum(U * Ud, axis=0)
    bracket = np.sum(Ud * Ud, axis=0) - UUd**2 / U0**2
    conv = sum(Uup[mu] / U0 * d_ratio(mu) for mu in range(4))
    b, l = inhom.b, inhom.l
    h = b[2:5]
    return (divU * Sd**2 + div_U_over_Q * Pd**2 + 2.0 * np.sum(d_ratio(0) * Ud, axis=0) * Pd
            + div_RPU * bracket - 2.0 * UUd * RP * np.sum(conv * Ud, axis=0)
            + 2.0 * Sd * b[0] + 2.0 * Pd * b[1] / Q + 2.0 * np.sum(Ud * h, axis=0)
            - 2.0 * np.sum(U * h, axis=0) * UUd / U0**2
            - Vd[6] * l[0] + np.sum(Vd[7:10] * l[1:4], axis=0) + Vd[5] * l[4])
