"""Characteristic geometry of the system: acoustical metrics, characteristic
form, sheet classification, hyperbolicity roots and Christoffel symbols."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .eos import EosSpec, weighted_sound_speed_sq
from .errors import ParallelDirections, SoundSpeedDegenerate
from .state import ETA, _eos, as_array, check_admissible, four_velocity

ETA_INV = ETA  # diag(-1, 1, 1, 1) is its own inverse
SHEETS = ("P_U", "P_0", "C_s", "C_l")


@dataclass(frozen=True)
class AcousticalPair:
    h: np.ndarray
    h_inv: np.ndarray
    sigma2: float


def acoustical_pair(Uup, sigma2: float) -> AcousticalPair:
    """Metric pair for a 4-velocity and squared sound speed (no range check)."""
    Uup = np.asarray(Uup, dtype=float)
    Ulow = ETA @ Uup
    h_inv = ETA_INV - (1.0 / sigma2 - 1.0) * np.outer(Uup, Uup)
    h = ETA + (1.0 - sigma2) * np.outer(Ulow, Ulow)
    return AcousticalPair(h, h_inv, float(sigma2))


def sound_speed_sq_of(V, eos: EosSpec | None = None) -> float:
    V = as_array(V)
    return float(weighted_sound_speed_sq(_eos(eos), V[0], V[1], V[5]))


def acoustical_metrics(V, eos: EosSpec | None = None) -> AcousticalPair:
    """Acoustical metric h and reciprocal h^{-1} at a state."""
    V = as_array(V)
    check_admissible(V)
    s2 = sound_speed_sq_of(V, eos)
    if not 0.0 < s2 < 1.0:
        raise SoundSpeedDegenerate(f"sigma^2 = {s2} outside (0, 1)")
    return acoustical_pair(four_velocity(V), s2)


@dataclass
class CharDecomposition:
    value: float
    factors: dict
    sheets: set = field(default_factory=set)


def _factors(Uup, pair: AcousticalPair, xi):
    return {
        "xi0": float(xi[0]),
        "U.xi": float(Uup @ xi),
        "h_inv": float(xi @ pair.h_inv @ xi),
        "g_inv": float(xi @ ETA_INV @ xi),
    }


def characteristic_form(V, xi, tol: float = 1e-9, eos: EosSpec | None = None) -> CharDecomposition:
    """Q(x; xi) = xi0^3 (U.xi)^3 h^{-1}(xi,xi) g^{-1}(xi,xi) with sheet membership."""
    V = as_array(V)
    xi = np.asarray(xi, dtype=float)
    pair = acoustical_metrics(V, eos)
    Uup = four_velocity(V)
    f = _factors(Uup, pair, xi)
    value = f["xi0"] ** 3 * f["U.xi"] ** 3 * f["h_inv"] * f["g_inv"]
    scale = float(np.linalg.norm(xi))
    sheets = set()
    if abs(f["U.xi"]) < tol * scale * float(np.linalg.norm(Uup)):
        sheets.add("P_U")
    if abs(f["xi0"]) < tol * scale:
        sheets.add("P_0")
    if abs(f["h_inv"]) < tol * scale**2 * max(1.0, float(np.abs(pair.h_inv).max())):
        sheets.add("C_s")
    if abs(f["g_inv"]) < tol * scale**2:
        sheets.add("C_l")
    return CharDecomposition(float(value), f, sheets)


def symbol(V, xi, eos: EosSpec | None = None) -> np.ndarray:
    """The 10x10 principal symbol obtained by d_mu -> xi_mu in the EOV."""
    from .system import coeff_matrices

    V = as_array(V)
    xi = np.asarray(xi, dtype=float)
    mats = coeff_matrices(V, eos)
    M = np.zeros((10, 10))
    M[:5, :5] = sum(xi[mu] * mats[mu] for mu in range(4))
    M[5, 6] = -xi[0]
    M[5, 7:10] = xi[1:]
    for j in range(3):
        M[6 + j, 7 + j] = xi[0]
        M[6 + j, 6] = -xi[1 + j]
    M[9, 5] = xi[0]
    return M


def in_positive_core(xi) -> bool:
    """Membership of xi in the positive component of the interior of the light cone."""
    xi = np.asarray(xi, dtype=float)
    return bool(xi @ ETA_INV @ xi < 0.0 and xi[0] > 0.0)


def _linear_root(a, b):
    # root of a*lam + b
    return complex(-b / a) if a != 0.0 else complex(np.nan, np.nan)


def _quadratic_roots(a, b, c):
    if a == 0.0:
        return [_linear_root(b, c), complex(np.nan, np.nan)]
    disc = complex(b * b - 4.0 * a * c)
    sq = np.sqrt(disc)
    # numerically stable pairing
    q = -0.5 * (b + (sq if (b.real if isinstance(b, complex) else b) >= 0 else -sq))
    r1 = q / a
    r2 = c / q if q != 0 else -r1
    return [complex(r1), complex(r2)]


@dataclass
class RootReport:
    roots: np.ndarray  # 10 complex roots
    hyperbolic: bool
    strictly_hyperbolic: bool
    xi_in_core: bool


def hyperbolic_roots(V, xi, upsilon, eos: EosSpec | None = None, imag_tol: float = 1e-7,
                     distinct_tol: float = 1e-9) -> RootReport:
    """Roots in lambda of Q(x; lambda xi + upsilon), computed factor by factor."""
    V = as_array(V)
    xi = np.asarray(xi, dtype=float)
    up = np.asarray(upsilon, dtype=float)
    nx, nu = np.linalg.norm(xi), np.linalg.norm(up)
    if nx == 0 or nu == 0 or np.linalg.matrix_rank(np.vstack([xi / nx, up / nu]), tol=1e-12) < 2:
        raise ParallelDirections("upsilon must not be parallel to xi")
    pair = acoustical_metrics(V, eos)
    Uup = four_velocity(V)
    roots = [_linear_root(xi[0], up[0])] * 3
    roots += [_linear_root(Uup @ xi, Uup @ up)] * 3
    for G in (pair.h_inv, ETA_INV):
        roots += _quadratic_roots(xi @ G @ xi, 2.0 * (xi @ G @ up), up @ G @ up)
    roots = np.array(roots, dtype=complex)
    finite = np.all(np.isfinite(roots))
    real = finite and bool(np.all(np.abs(roots.imag) <= imag_tol * np.maximum(np.abs(roots), 1e-300)))
    strict = False
    if real:
        r = np.sort(roots.real)
        strict = bool(np.all(np.diff(r) > distinct_tol * max(1.0, np.abs(r).max())))
    return RootReport(roots, real, strict, in_positive_core(xi))


def christoffel(phi, dphi) -> np.ndarray:
    """Gamma^a_{mu nu} of the conformally flat metric e^{2 phi} eta; indexed [a, mu, nu]."""
    dphi = np.asarray(dphi, dtype=float)
    I = np.eye(4)
    dphi_up = ETA_INV @ dphi
    return (np.einsum("an,m->amn", I, dphi) + np.einsum("am,n->amn", I, dphi)
            - np.einsum("mn,a->amn", ETA, dphi_up))


def null_space_contains(xi, X, tol: float = 1e-10) -> bool:
    """Whether X lies in N_xi = {X : xi_mu X^mu = 0}."""
    xi = np.asarray(xi, dtype=float)
    X = np.asarray(X, dtype=float)
    return bool(abs(xi @ X) <= tol * max(1.0, np.linalg.norm(xi) * np.linalg.norm(X)))


def write_sweep_csv(path, rows) -> None:
    """rows: iterable of (V, xi, CharDecomposition, RootReport or None)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["S", "P", "U1", "U2", "U3", "phi", "psi0", "psi1", "psi2", "psi3",
                    "xi0", "xi1", "xi2", "xi3", "Q", "sheets", "roots"])
        for V, xi, dec, rep in rows:
            roots = "" if rep is None else ";".join(f"{r.real:.12g}{r.imag:+.3g}j" for r in rep.roots)
            w.writerow([*(f"{v:.12g}" for v in as_array(V)), *(f"{x:.12g}" for x in xi),
                        f"{dec.value:.12g}", "|".join(sorted(dec.sheets)), roots])
