"""Free energies, the monopole mass and the holonomy splitting.

Monopole masses are normalized per spin species: ``Δ`` is the free-energy
cost per site of one fermion species, which is the quantity given by the
three-integral expression evaluated in :func:`monopole_mass_infinite`.
Total (spinful) energies elsewhere carry the factor 2.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, curve_fit

from .gauge import (
    FluxSector,
    GaugeConfig,
    canonical_rep,
    chessboard_background,
    iter_sectors,
    pi_flux_background,
)
from .spectral import (
    SPIN,
    BlochCell,
    Twist,
    assemble,
    brillouin_zone,
    diagonalize,
    e_minus,
    exp_fit,
    ground_energies,
)

HOLONOMIES = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class FreeEnergyRequest:
    background: GaugeConfig
    beta: float
    m: float = 1.0
    t: float = 1.0
    twist: Twist | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def free_energy_from_eigenvalues(eps, beta: float, spin: int = SPIN) -> float:
    """``-(spin / beta) * sum log(1 + exp(-beta * eps))``; ``beta=inf`` gives E0."""
    eps = np.asarray(eps, dtype=float)
    if np.isinf(beta):
        return float(spin * eps[eps < 0].sum())
    return float(-spin * np.logaddexp(0.0, -beta * eps).sum() / beta)


def free_energy(req: FreeEnergyRequest, spin: int = SPIN) -> float:
    eps = np.linalg.eigvalsh(assemble(req.background, req.t, req.m, req.twist).matrix)
    return free_energy_from_eigenvalues(eps, req.beta, spin)


def monopole_mass_finite(L: int, beta: float, m: float, t: float = 1.0) -> float:
    """``Δ_{β,L} = min_{a,b} [F(σ*(a,b)) - F(π(-1,-1))] / L²`` for one species.

    ``beta`` may be ``np.inf`` for the ground-state limit.
    """
    if L % 4:
        raise ValueError("monopole mass needs L divisible by 4")
    ref = free_energy_from_eigenvalues(
        np.linalg.eigvalsh(assemble(pi_flux_background(L, -1, -1), t, m).matrix), beta, 1)
    vals = []
    for a, b in HOLONOMIES:
        eps = np.linalg.eigvalsh(assemble(chessboard_background(L, a, b), t, m).matrix)
        vals.append(free_energy_from_eigenvalues(eps, beta, 1) - ref)
    return min(vals) / L**2


@dataclass(frozen=True)
class BetaExtrapolation:
    """Fit ``Δ_β = Δ + c * exp(-r * β)`` over a set of inverse temperatures."""

    betas: np.ndarray
    values: np.ndarray
    delta: float
    exact: float
    amplitude: float
    rate: float


def extrapolate_beta(L: int, m: float, t: float = 1.0, betas=(8, 16, 32, 64)) -> BetaExtrapolation:
    """Large-``β`` limit of ``Δ_{β,L}``.

    The fitted limit is reported next to the exact ``β = ∞`` value computed
    from ground-state energies; the exact value is what downstream code uses.
    """
    betas = np.asarray(betas, dtype=float) / t
    vals = np.array([monopole_mass_finite(L, b, m, t) for b in betas])
    exact = monopole_mass_finite(L, np.inf, m, t)
    amp, rate = 0.0, 0.0
    fit_delta = exact
    if np.ptp(vals) > 1e-14:
        try:
            (fit_delta, amp, rate), _ = curve_fit(
                lambda b, d, c, r: d + c * np.exp(-r * b), betas, vals,
                p0=(vals[-1], vals[0] - vals[-1], 1.0 / betas[0]), maxfev=20000)
        except RuntimeError:
            fit_delta = vals[-1]
    return BetaExtrapolation(betas, vals, float(fit_delta), exact, float(amp), float(rate))


def _torus_means(m: float, t: float, n: int) -> float:
    # shifted grid keeps the m = 0 conical point off the nodes
    k = 2 * np.pi * (np.arange(n) + 0.5) / n
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    c1, c2 = np.cos(k1), np.cos(k2)
    r = (m / (2 * t)) ** 2
    s = np.sqrt(1 + c1**2 + c2**2)
    return t * (np.sqrt(r + 1 + 0.5 * c1 + 0.5 * c2).mean()
                - 0.5 * np.sqrt(r + 1 + 0.5 * s).mean()
                - 0.5 * np.sqrt(r + 1 - 0.5 * s).mean())


def monopole_mass_infinite(m: float, t: float = 1.0, tol: float = 1e-10,
                           n_start: int = 32, n_max: int = 8192) -> float:
    """Infinite-volume monopole mass by periodic trapezoid quadrature.

    The resolution is doubled until successive values differ by less than
    ``tol``.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    n = n_start
    prev = _torus_means(m, t, n)
    while True:
        n *= 2
        cur = _torus_means(m, t, n)
        if abs(cur - prev) < tol:
            return float(cur)
        if n >= n_max:
            raise RuntimeError("monopole-mass quadrature did not converge")
        prev = cur


@dataclass(frozen=True)
class Crossover:
    m: np.ndarray
    monopole_gap: np.ndarray
    fermion_gap: np.ndarray
    crossings: list = field(default_factory=list)


def crossover_scan(m_grid, t: float = 1.0) -> Crossover:
    """Monopole gap ``2Δ_∞(m)`` against the free fermion gap ``2m``.

    Every sign change of ``2m - 2Δ_∞(m)`` on the grid is refined by Brent's
    method; the refined roots are listed in ``crossings``.
    """
    ms = np.asarray(m_grid, dtype=float)
    mono = np.array([2 * monopole_mass_infinite(x, t) for x in ms])
    ferm = 2 * ms
    diff = ferm - mono
    roots = []
    for i in range(len(ms) - 1):
        if diff[i] == 0:
            roots.append(float(ms[i]))
        elif diff[i] * diff[i + 1] < 0:
            roots.append(float(brentq(lambda x: x - monopole_mass_infinite(x, t),
                                      ms[i], ms[i + 1], xtol=1e-13)))
    if diff[-1] == 0:
        roots.append(float(ms[-1]))
    return Crossover(ms, mono, ferm, roots)


@dataclass(frozen=True)
class SplittingFit:
    L: np.ndarray
    splitting: np.ndarray
    energies: np.ndarray
    rate: float
    intercept: float
    r2: float


def pi_flux_energies(L: int, m: float, t: float = 1.0) -> np.ndarray:
    """Spinful ground energies of the four Z2 holonomy sectors."""
    return np.array([diagonalize(assemble(pi_flux_background(L, a, b), t, m)).E0_half_filling
                     for a, b in HOLONOMIES])


def holonomy_splitting(L_list, m: float, t: float = 1.0) -> SplittingFit:
    """Largest ground-energy difference among the four Z2 holonomies, per L,
    and the fit ``log(splitting) = α - c L`` (``nan`` for a single L)."""
    Ls = np.asarray(L_list, dtype=int)
    energies = np.array([pi_flux_energies(int(L), m, t) for L in Ls])
    split = energies.max(axis=1) - energies.min(axis=1)
    if Ls.size < 2:
        return SplittingFit(Ls, split, energies, float("nan"), float("nan"), float("nan"))
    fit = exp_fit(Ls, split)
    return SplittingFit(Ls, split, energies, fit.rate, fit.intercept, fit.r2)


def u1_energy_sweep(L: int, m: float, t: float = 1.0, n: int = 8) -> np.ndarray:
    """Spinful ground energy on an ``n x n`` grid of U(1) holonomies ``(θ, φ)``.

    Uses the Bloch reduction of the pi-flux phase, which is exact for every
    twisted boundary condition.
    """
    out = np.empty((n, n))
    angles = 2 * np.pi * np.arange(n) / n
    for i, th in enumerate(angles):
        for j, ph in enumerate(angles):
            ks = brillouin_zone(BlochCell.PI_FLUX_4SITE, L, th, ph)
            # each Bloch level is doubly degenerate, times two spin species
            out[i, j] = 2 * SPIN * e_minus(ks[:, 0], ks[:, 1], m, t).sum()
    return out


@dataclass(frozen=True)
class SectorSweep:
    """Exhaustive (or sampled) ground energies over flux sectors."""

    L: int
    m: float
    t: float
    energies: np.ndarray
    n_monopoles: np.ndarray
    holonomies: np.ndarray
    reference: float
    delta_L: float

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.energies))

    @property
    def min_is_pi_flux(self) -> bool:
        return bool(self.n_monopoles[self.argmin] == 0)

    def bound_margin(self) -> np.ndarray:
        """``E0(σ) - E0(π(-1,-1)) - 2k Δ_L`` for each sector (``2k`` monopoles)."""
        return self.energies - self.reference - self.n_monopoles * self.delta_L


def sector_sweep(L: int, m: float, t: float = 1.0, sample: int | None = None,
                 seed: int = 0, threads: int = 1, chunk: int = 8192) -> SectorSweep:
    """Ground energy of every flux sector, or of a random sample of them.

    ``Δ_L`` is the ground-state (``β = ∞``) monopole mass at the same ``L``.
    Results are independent of ``threads``.
    """
    if sample is None:
        sectors = list(iter_sectors(L))
    else:
        rng = np.random.default_rng(seed)
        n = L * L
        sectors = []
        for _ in range(sample):
            fl = 1 - 2 * rng.integers(0, 2, n - 1)
            fl = np.append(fl, np.prod(fl))
            a, b = (1 - 2 * rng.integers(0, 2, 2)).tolist()
            sectors.append(FluxSector(L, tuple(fl.tolist()), a, b))
    sig = np.array([canonical_rep(s).sigma for s in sectors])
    blocks = [sig[i:i + chunk] for i in range(0, len(sig), chunk)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda b: ground_energies(b, L, t, m), blocks))
    else:
        parts = [ground_energies(b, L, t, m) for b in blocks]
    energies = np.concatenate(parts)
    ref = diagonalize(assemble(pi_flux_background(L, -1, -1), t, m)).E0_half_filling
    delta = monopole_mass_finite(L, np.inf, m, t) if L % 4 == 0 else float("nan")
    return SectorSweep(
        L, m, t, energies,
        np.array([s.n_monopoles for s in sectors]),
        np.array([(s.a, s.b) for s in sectors]),
        ref, delta,
    )
