"""Maximization of the ground Dirichlet eigenvalue over the potential ball.

For gamma > 1 the unique maximizer is the fixed point of the best-response
map Phi(y) = (y^2/r)^(1/(gamma-1)) / normalization, which simultaneously
is the conditional-gradient direction of the concave objective; a damped
iteration q <- (1 - tau) q + tau Phi(y) therefore climbs monotonically and
converges geometrically.  For gamma = 1 the solver optimizes a pure-atom
measure: atom positions by coordinate ascent with golden-section line
searches, mass shares by projected gradient on the simplex, with the
weighted total mass saturating the constraint at every step.

The gamma = 1 characterization defect (supremum of y^2/r versus the
measure pairing with y^2) is reported honestly: a positive point mass
forces an upward derivative kink in the eigenfunction, so an atom can
never sit exactly at a maximizer of y^2/r and the defect of a finite-atom
potential stays bounded away from zero for smooth weights.  The defect
shrinks only as the atom count grows toward the density-type limit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .config import SolverConfig
from .eigensolver import (
    EigenPair,
    ShootingSolution,
    _eigenvalue_warm,
    eigenfunction,
    eigenvalue,
    pencil_form,
)
from .measures import (
    DomainError,
    InvalidPotentialError,
    ParameterError,
    Potential,
    PowerWeight,
    Weight,
    constraint_value,
    potential_to_dict,
    _resample_density,
)

__all__ = [
    "ExtremalReport",
    "PerturbationSpec",
    "solve_extremal_gamma_gt1",
    "solve_extremal_gamma_eq1",
    "characterization_residual",
    "directional_derivative",
    "perturbation_path",
]

DAMPING_FLOOR = 1.0 / 16.0
ATOM_SCAN_POINTS = 129
ATOM_MARGIN = 1.0 / 64.0  # atom search region [margin, 1 - margin]
PRUNE_SHARE = 1e-12


@dataclass(frozen=True)
class ExtremalReport:
    """Outcome of an extremal solve."""

    M: float
    q_hat: Potential
    ground_state: EigenPair
    residual: float
    constraint: float
    trace: tuple[tuple[int, float, float], ...]
    converged: bool

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "q_hat": potential_to_dict(self.q_hat),
            "ground_state": self.ground_state.to_dict(),
            "residual": self.residual,
            "constraint": self.constraint,
            "trace": [[it, lam, res] for it, lam, res in self.trace],
            "converged": self.converged,
        }


@dataclass(frozen=True)
class PerturbationSpec:
    """Perturbation path data: q_eps = ((1-eps) base + eps direction)/(1+alpha eps).

    The weight is carried along because the admissible range of alpha
    depends on it: alpha must strictly exceed the weighted pairing of the
    direction with base**(gamma-1), minus one.
    """

    base: Potential
    direction: Potential
    alpha: float
    weight: Weight


# ---------------------------------------------------------------------------
# shared pieces


def _char_map(
    w: Weight, gamma: float, mids: np.ndarray, cell_r: np.ndarray, ymid: np.ndarray
) -> np.ndarray:
    """Best-response density: (y^2/r)^(1/(gamma-1)), normalized so the
    discrete constraint integral equals one exactly.  Evaluated in log
    space so that gamma close to 1 cannot overflow."""
    rv = w.values_at(mids)
    s = (2.0 * np.log(np.maximum(ymid, 1e-300)) - np.log(rv)) / (gamma - 1.0)
    s -= s.max()
    u = np.exp(s)
    d_hat = float(np.dot(cell_r, u**gamma))
    return u * d_hat ** (-1.0 / gamma)


def _rel_dist_lgamma(
    cell_r: np.ndarray, q: np.ndarray, v: np.ndarray, gamma: float
) -> float:
    num = float(np.dot(cell_r, np.abs(q - v) ** gamma)) ** (1.0 / gamma)
    den = float(np.dot(cell_r, q**gamma)) ** (1.0 / gamma)
    return num / den


def _weight_precheck(w: Weight, gamma: float) -> None:
    # the normalization integral of the best response must converge:
    # y vanishes linearly at the endpoints, so power exponents must stay
    # below 3*gamma - 1
    if isinstance(w, PowerWeight):
        lim = 3.0 * gamma - 1.0
        if w.alpha >= lim or w.beta >= lim:
            raise ParameterError(
                f"power weight exponents must be < 3*gamma-1 = {lim} "
                f"for the characterization integral to converge"
            )


# ---------------------------------------------------------------------------
# gamma > 1: damped fixed-point iteration


def solve_extremal_gamma_gt1(
    w: Weight, gamma: float, cfg: SolverConfig | None = None
) -> ExtremalReport:
    """Extremal potential and majorant for gamma > 1.

    Iterates q <- (1 - tau) q + tau Phi(y) from the constraint-normalized
    constant potential; tau halves whenever the ground eigenvalue drops
    (floor 1/16).  Stops when the eigenvalue is stationary to tol_outer
    (relative) and the characterization residual -- the relative distance
    between q and Phi(y) in the weighted L^gamma norm -- is below tol_res.
    """
    cfg = cfg or SolverConfig()
    if not (gamma > 1.0):
        raise ParameterError("this solver requires gamma > 1")
    _weight_precheck(w, gamma)
    n = cfg.grid_n
    edges = np.arange(n + 1) / n
    mids = (np.arange(n) + 0.5) / n
    cell_r = w.cell_pow_integrals(edges)
    q = np.full(n, float(np.sum(cell_r)) ** (-1.0 / gamma))

    tau = cfg.damping
    lam_prev = None
    guess = None
    trace: list[tuple[int, float, float]] = []
    converged = False
    lam = math.nan
    for k in range(cfg.max_iter):
        pot = Potential(n, q)
        if guess is None:
            lam = eigenvalue(pot, 0, cfg.tol_eigen)
        else:
            lam = _eigenvalue_warm(pot, 0, cfg.tol_eigen, guess)
        sol = ShootingSolution(pot, lam)
        ymid = sol.values(mids)
        v = _char_map(w, gamma, mids, cell_r, ymid)
        res = _rel_dist_lgamma(cell_r, q, v, gamma)
        trace.append((k, lam, res))
        if lam_prev is not None:
            if lam < lam_prev - 1e-12 * max(lam, 1.0):
                tau = max(tau / 2.0, DAMPING_FLOOR)
            if abs(lam - lam_prev) < cfg.tol_outer * lam and res < cfg.tol_res:
                converged = True
                break
        lam_prev = lam
        guess = lam
        q = (1.0 - tau) * q + tau * v

    # snap to the exact best response: its constraint integral is one by
    # construction and its own residual is a contraction of the last one
    q_hat = Potential(n, v)
    lam = _eigenvalue_warm(q_hat, 0, cfg.tol_eigen, lam)
    sol = ShootingSolution(q_hat, lam)
    v_final = _char_map(w, gamma, mids, cell_r, sol.values(mids))
    res = _rel_dist_lgamma(cell_r, v, v_final, gamma)
    trace.append((len(trace), lam, res))
    pair = eigenfunction(q_hat, lam, 0)
    return ExtremalReport(
        M=lam,
        q_hat=q_hat,
        ground_state=pair,
        residual=res,
        constraint=constraint_value(w, gamma, q_hat),
        trace=tuple(trace),
        converged=converged,
    )


# ---------------------------------------------------------------------------
# gamma = 1: atom placement


def _golden_max(f, a: float, b: float, tol: float):
    """Golden-section maximization on [a, b]; returns (x, f(x))."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    invphi2 = (3.0 - math.sqrt(5.0)) / 2.0
    x1 = a + invphi2 * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = a + invphi2 * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _simplex_project(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _atom_potential(w, zs, shares, grid_n=16) -> Potential:
    atoms = tuple(
        (z, s / float(w(z))) for z, s in zip(zs, shares) if s > 0.0
    )
    return Potential.from_atoms(atoms, grid_n)


def _sup_y2_over_r(w: Weight, sol: ShootingSolution, probes: int = 2049):
    """Supremum of y^2 / r over (0, 1): dense probe plus golden refinement."""
    delta = 1e-6
    grid = np.linspace(delta, 1.0 - delta, probes)
    xs = np.union1d(grid, np.clip(sol.breakpoints[1:-1], delta, 1.0 - delta))
    vals = sol.values(xs) ** 2 / w.values_at(xs)
    i = int(np.argmax(vals))
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, len(xs) - 1)]

    def f(x):
        return float(sol.values([x])[0] ** 2 / w(x))

    x_star, v_star = _golden_max(f, float(lo), float(hi), 1e-12)
    if vals[i] > v_star:
        return float(xs[i]), float(vals[i])
    return x_star, v_star


def solve_extremal_gamma_eq1(
    w: Weight, k_atoms: int, cfg: SolverConfig | None = None
) -> ExtremalReport:
    """Best pure-atom potential for the gamma = 1 ball.

    Positions move one at a time to the golden-section maximizer of the
    ground eigenvalue inside their bracket (initial brackets from a coarse
    scan of single-atom eigenvalues); mass shares follow projected-gradient
    steps on the simplex, so the weighted total mass stays exactly one.
    Convergence means positions and eigenvalue have stabilized; the
    characterization residual is reported as-is (see the module note on
    why it cannot vanish for finitely many atoms).
    """
    cfg = cfg or SolverConfig()
    if k_atoms < 1:
        raise ParameterError("k_atoms must be a positive integer")
    if isinstance(w, PowerWeight) and (w.alpha >= 2.0 or w.beta >= 2.0):
        raise ParameterError(
            "power weight exponents must be < 2 so that y^2/r stays "
            "bounded near the endpoints"
        )
    lo, hi = ATOM_MARGIN, 1.0 - ATOM_MARGIN

    # coarse scan of the single-atom eigenvalue
    scan_z = np.linspace(lo, hi, ATOM_SCAN_POINTS)
    scan_lam = np.empty_like(scan_z)
    guess = None
    for i, z in enumerate(scan_z):
        pot = _atom_potential(w, [z], [1.0])
        lam = (
            eigenvalue(pot, 0, cfg.tol_eigen)
            if guess is None
            else _eigenvalue_warm(pot, 0, cfg.tol_eigen, guess)
        )
        scan_lam[i] = lam
        guess = lam

    # initial positions: interior local maxima of the scan, best first
    maxima = [
        i
        for i in range(1, len(scan_z) - 1)
        if scan_lam[i] >= scan_lam[i - 1] and scan_lam[i] >= scan_lam[i + 1]
    ]
    maxima.sort(key=lambda i: -scan_lam[i])
    positions = [float(scan_z[i]) for i in maxima[:k_atoms]]
    if len(positions) < k_atoms:
        order = np.argsort(-scan_lam)
        for i in order:
            z = float(scan_z[i])
            if all(abs(z - p) > 4.0 * (hi - lo) / ATOM_SCAN_POINTS for p in positions):
                positions.append(z)
            if len(positions) == k_atoms:
                break
    positions.sort()
    zs = np.asarray(positions)
    shares = np.full(len(zs), 1.0 / len(zs))

    def lam_of(z_arr, s_arr, warm=None):
        pot = _atom_potential(w, z_arr, s_arr)
        if warm is None:
            return eigenvalue(pot, 0, cfg.tol_eigen)
        return _eigenvalue_warm(pot, 0, cfg.tol_eigen, warm)

    lam = lam_of(zs, shares)
    trace: list[tuple[int, float, float]] = []
    converged = False
    for sweep in range(cfg.max_iter):
        lam_start = lam
        max_move = 0.0
        # positions, one coordinate at a time
        for j in range(len(zs)):
            left = lo if j == 0 else 0.5 * (zs[j - 1] + zs[j]) + cfg.pos_tol
            right = hi if j == len(zs) - 1 else 0.5 * (zs[j] + zs[j + 1]) - cfg.pos_tol
            if right <= left:
                continue

            def f(z, j=j):
                trial = zs.copy()
                trial[j] = z
                return lam_of(trial, shares, warm=lam)

            z_new, lam_new = _golden_max(f, left, right, 0.25 * cfg.pos_tol)
            if lam_new > lam:
                max_move = max(max_move, abs(z_new - zs[j]))
                zs[j] = z_new
                lam = lam_new
        # mass shares by projected gradient with backtracking
        if len(zs) > 1:
            pot = _atom_potential(w, zs, shares)
            sol = ShootingSolution(pot, lam)
            grad = sol.values(zs) ** 2 / w.values_at(zs)
            step = 1.0 / max(float(np.max(np.abs(grad))), 1e-30)
            for _ in range(24):
                trial = _simplex_project(shares + step * grad)
                lam_t = lam_of(zs, trial, warm=lam)
                if lam_t > lam:
                    shares = trial
                    lam = lam_t
                    break
                step /= 2.0
        # prune share-starved atoms
        keep = shares > PRUNE_SHARE
        if not np.all(keep):
            warnings.warn(
                f"pruning {int(np.sum(~keep))} atom(s) with negligible mass",
                stacklevel=2,
            )
            zs = zs[keep]
            shares = shares[keep] / float(np.sum(shares[keep]))
            lam = lam_of(zs, shares)
        res = _eq1_residual(w, zs, shares, lam)
        trace.append((sweep, lam, res))
        if max_move < cfg.pos_tol and abs(lam - lam_start) < cfg.tol_outer * lam:
            converged = True
            break

    q_hat = _atom_potential(w, zs, shares, grid_n=cfg.grid_n)
    pair = eigenfunction(q_hat, lam, 0)
    return ExtremalReport(
        M=lam,
        q_hat=q_hat,
        ground_state=pair,
        residual=trace[-1][2],
        constraint=constraint_value(w, 1.0, q_hat),
        trace=tuple(trace),
        converged=converged,
    )


def _eq1_residual(w, zs, shares, lam) -> float:
    pot = _atom_potential(w, zs, shares)
    sol = ShootingSolution(pot, lam)
    _, sup = _sup_y2_over_r(w, sol)
    pairing = float(
        sum(
            m * sol.values([p])[0] ** 2
            for p, m in pot.atoms
        )
    )
    return abs(sup - pairing) / sup


# ---------------------------------------------------------------------------
# characterization residual (both regimes)


def characterization_residual(
    w: Weight, gamma: float, q: Potential, y: EigenPair
) -> float:
    """Defect of the extremality characterization at (q, y).

    gamma > 1: relative weighted-L^gamma distance between q and the
    normalized best response built from y.  gamma = 1: normalized gap
    between the supremum of y^2/r and the pairing of the measure with y^2.
    Zero characterizes the extremal potential.
    """
    if gamma < 1.0:
        raise ParameterError("gamma must be >= 1")
    if abs(pencil_form(q, y.lam, y)) > 1e-6 * max(1.0, abs(y.lam)):
        raise DomainError("eigenpair does not belong to this potential")
    sol = ShootingSolution(q, y.lam)
    if gamma > 1.0:
        if q.atoms:
            raise InvalidPotentialError(
                "the gamma > 1 characterization applies to atom-free q"
            )
        n = q.grid_n
        edges = q.edges()
        mids = q.midpoints()
        cell_r = w.cell_pow_integrals(edges)
        ymid = sol.values(mids)
        v = _char_map(w, gamma, mids, cell_r, ymid)
        return _rel_dist_lgamma(cell_r, q.density, v, gamma)
    _, sup = _sup_y2_over_r(w, sol)
    pairing = float(np.dot(q.density, sol.cell_square_masses(q.edges())))
    pairing += sum(m * float(sol.values([p])[0]) ** 2 for p, m in q.atoms)
    return abs(sup - pairing) / sup


# ---------------------------------------------------------------------------
# perturbation derivatives


def _pair_with_y2(v: Potential, sol: ShootingSolution) -> float:
    """Pairing of the measure v with y^2: cell integrals plus point masses."""
    total = float(np.dot(v.density, sol.cell_square_masses(v.edges())))
    for pos, mass in v.atoms:
        total += mass * float(sol.values([pos])[0]) ** 2
    return total


def alpha_lower_bound(w: Weight, gamma: float, base: Potential, p: Potential) -> float:
    """Admissibility threshold: weighted pairing of p with base**(gamma-1),
    minus one.  At gamma = 1 this is the constraint value of p minus one."""
    if gamma == 1.0:
        return constraint_value(w, 1.0, p) - 1.0
    edges = np.union1d(base.edges(), p.edges())
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (a + b)
        pv = p.density_at(x)
        if pv == 0.0:
            continue
        total += pv * base.density_at(x) ** (gamma - 1.0) * w.pow_integral(1.0, a, b)
    for pos, mass in p.atoms:
        total += mass * float(w(pos)) * base.density_at(pos) ** (gamma - 1.0)
    return total - 1.0


def directional_derivative(spec: PerturbationSpec, gamma: float) -> float:
    """First-order change of the ground eigenvalue along the perturbation
    path at eps = 0: the pairing of p - (alpha+1) q with y^2 for gamma > 1,
    and of p - q with y^2 for gamma = 1 (where alpha is fixed to 0)."""
    if gamma < 1.0:
        raise ParameterError("gamma must be >= 1")
    if gamma == 1.0:
        if spec.alpha != 0.0:
            raise ParameterError("the gamma = 1 path uses alpha = 0")
    else:
        # equality is admitted up to roundoff: the ball is closed, and the
        # stationary path (direction = base, alpha = 0) sits exactly there
        bound = alpha_lower_bound(spec.weight, gamma, spec.base, spec.direction)
        if spec.alpha < bound - 1e-12:
            raise ParameterError(
                f"alpha = {spec.alpha} must not fall below {bound}"
            )
    lam = eigenvalue(spec.base, 0, 1e-13)
    sol = ShootingSolution(spec.base, lam)
    pair_p = _pair_with_y2(spec.direction, sol)
    pair_q = _pair_with_y2(spec.base, sol)
    if gamma == 1.0:
        return pair_p - pair_q
    return pair_p - (spec.alpha + 1.0) * pair_q


def perturbation_path(spec: PerturbationSpec, eps: float) -> Potential:
    """Potential on the path ((1-eps) base + eps p) / (1 + alpha eps)."""
    if 1.0 + spec.alpha * eps <= 0.0:
        raise ParameterError("path parameter leaves the admissible range")
    base, p = spec.base, spec.direction
    n = base.grid_n
    if p.grid_n != n:
        n = math.lcm(base.grid_n, p.grid_n)
    scale = 1.0 / (1.0 + spec.alpha * eps)
    dens = (
        (1.0 - eps) * _resample_density(base.density, base.grid_n, n)
        + eps * _resample_density(p.density, p.grid_n, n)
    ) * scale
    atoms = [(pos, (1.0 - eps) * m * scale) for pos, m in base.atoms]
    atoms += [(pos, eps * m * scale) for pos, m in p.atoms]
    atoms = [(pos, m) for pos, m in atoms if m != 0.0]
    return Potential(n, dens, tuple(atoms))
