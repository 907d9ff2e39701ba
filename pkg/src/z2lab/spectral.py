"""Quadratic fermion Hamiltonians in static Z2 backgrounds.

The single-particle matrix acts on the ``L*L`` sites of one spin species:

    h[i, j] = -t * sigma_ij * exp(-1j * phi * I_ij)    (i -> j an edge)
    h[i, i] = m * (-1)**(i1 + i2)

where ``I`` is the oriented twist cocycle. Spin enters only as a factor 2 in
energies; it is never materialized.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .gauge import GaugeConfig
from .topology import Chain, Lattice, _endpoints, oriented_cocycle

SPIN = 2
_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class Twist:
    """U(1) twist by angle ``phi`` across a dual 1-cycle."""

    cocycle: Chain
    phi: float

    def orientation(self) -> np.ndarray:
        return oriented_cocycle(self.cocycle)


@dataclass(frozen=True, eq=False)
class SingleParticleHamiltonian:
    lattice: Lattice
    background: GaugeConfig
    t: float
    m: float
    twist: Twist | None
    matrix: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    """Result of a dense diagonalization.

    Attributes
    ----------
    eigenvalues : ndarray
        Ascending single-particle energies.
    E0_half_filling : float
        ``2 * sum`` of the negative eigenvalues (both spin species).
    fermion_gap : float
        ``2 * min |eps|``.
    fermi_projector : ndarray or None
        Projector onto the negative-energy subspace; ``None`` when zero modes
        make half filling ambiguous.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    E0_half_filling: float
    fermion_gap: float
    fermi_projector: np.ndarray | None = field(repr=False)

    @property
    def projector_defined(self) -> bool:
        return self.fermi_projector is not None


def hopping_phases(L: int, twist: Twist | None) -> np.ndarray:
    if twist is None or twist.phi == 0:
        return np.ones(2 * L * L, dtype=complex)
    return np.exp(-1j * twist.phi * twist.orientation())


def assemble(
    background: GaugeConfig,
    t: float = 1.0,
    m: float = 0.0,
    twist: Twist | None = None,
) -> SingleParticleHamiltonian:
    """Build the single-particle matrix for a background and optional twist."""
    L = background.L
    lat = Lattice(L)
    if twist is not None and twist.cocycle.L != L:
        raise ValueError("twist lives on a different lattice")
    tail, head = _endpoints(L)
    amp = -t * background.sigma.astype(float) * hopping_phases(L, twist)
    h = np.zeros((L * L, L * L), dtype=complex)
    np.add.at(h, (tail, head), amp)
    np.add.at(h, (head, tail), amp.conj())
    h[np.diag_indices(L * L)] += m * lat.sublattice()
    return SingleParticleHamiltonian(lat, background, float(t), float(m), twist, h)


def e0_from_eigenvalues(eps: np.ndarray) -> np.ndarray:
    """Spinful half-filling energy ``2 * sum(eps < 0)`` along the last axis."""
    return SPIN * np.where(eps < 0, eps, 0.0).sum(axis=-1)


def diagonalize(h: SingleParticleHamiltonian | np.ndarray) -> SpectralSummary:
    mat = h.matrix if isinstance(h, SingleParticleHamiltonian) else np.asarray(h)
    eps, vecs = np.linalg.eigh(mat)
    gap = 2.0 * float(np.min(np.abs(eps)))
    occ = vecs[:, eps < 0]
    proj = None
    if gap > _ZERO_TOL and 2 * occ.shape[1] == eps.size:
        proj = occ @ occ.conj().T
    return SpectralSummary(eps, vecs, float(e0_from_eigenvalues(eps)), gap, proj)


def ground_energies(sigmas: np.ndarray, L: int, t: float = 1.0, m: float = 0.0,
                    chunk: int = 4096) -> np.ndarray:
    """Spinful half-filling energies for a stack of real backgrounds.

    Parameters
    ----------
    sigmas : ndarray, shape (n, 2*L*L)
        Edge variables, one configuration per row.
    """
    sigmas = np.atleast_2d(np.asarray(sigmas, dtype=float))
    tail, head = _endpoints(L)
    diag = m * Lattice(L).sublattice()
    out = np.empty(sigmas.shape[0])
    for start in range(0, sigmas.shape[0], chunk):
        block = sigmas[start:start + chunk]
        hs = np.zeros((block.shape[0], L * L, L * L))
        for e in range(tail.size):
            hs[:, tail[e], head[e]] += -t * block[:, e]
            hs[:, head[e], tail[e]] += -t * block[:, e]
        hs[:, np.arange(L * L), np.arange(L * L)] += diag
        out[start:start + chunk] = e0_from_eigenvalues(np.linalg.eigvalsh(hs))
    return out


# Bloch reduction


class BlochCell(enum.Enum):
    PI_FLUX_4SITE = "pi-flux"
    CHESSBOARD_8SITE = "chessboard"

    @property
    def size(self) -> int:
        return 4 if self is BlochCell.PI_FLUX_4SITE else 8

    @property
    def extent(self) -> tuple[int, int]:
        """Linear size of the magnetic cell in lattice units."""
        return (2, 2) if self is BlochCell.PI_FLUX_4SITE else (4, 2)


@dataclass(frozen=True)
class BlochModel:
    cell: BlochCell
    m: float = 0.0
    t: float = 1.0
    theta: float = 0.0
    phi: float = 0.0


def _pi_flux_matrix(k1, k2, m, t):
    e = np.exp
    z = np.zeros_like(np.asarray(k1 + k2, dtype=complex))
    a1, a2 = 1 + e(2j * k1), 1 + e(2j * k2)
    c1, c2 = a1.conj(), a2.conj()
    h = np.stack([
        np.stack([z + m, -t * a2, z, t * c1], -1),
        np.stack([-t * c2, z - m, -t * c1, z], -1),
        np.stack([z, -t * a1, z + m, -t * c2], -1),
        np.stack([t * a1, z, -t * a2, z - m], -1),
    ], -2)
    return h


def _chessboard_matrix(k1, k2, m, t):
    z = np.zeros_like(np.asarray(k1 + k2, dtype=complex))
    f = np.exp(-4j * k1) + z
    g = np.exp(-2j * k2) + z
    fc, gc = f.conj(), g.conj()
    o = z + 1
    rows = [
        [z - m, o, z, f, 1 + g, z, z, z],
        [o, z + m, o, z, z, -1 + g, z, z],
        [z, o, z - m, o, z, z, -1 + g, z],
        [fc, z, o, z + m, z, z, z, 1 + g],
        [1 + gc, z, z, z, z + m, -o, z, -f],
        [z, -1 + gc, z, z, -o, z - m, -o, z],
        [z, z, -1 + gc, z, z, -o, z + m, -o],
        [z, z, z, 1 + gc, -fc, z, -o, z - m],
    ]
    h = np.stack([np.stack(r, -1) for r in rows], -2)
    # hopping entries scale with t, the mass does not
    mass = np.diag([-m, m, -m, m, m, -m, m, -m]).astype(complex)
    return t * (h - mass) + mass


def bloch_matrix(model: BlochModel, k) -> np.ndarray:
    """Bloch matrix ``h(k)``; ``k`` has shape ``(..., 2)``."""
    k = np.asarray(k, dtype=float)
    k1, k2 = k[..., 0], k[..., 1]
    if model.cell is BlochCell.PI_FLUX_4SITE:
        return _pi_flux_matrix(k1, k2, model.m, model.t)
    return _chessboard_matrix(k1, k2, model.m, model.t)


def bloch_bands(model: BlochModel, k) -> np.ndarray:
    """Sorted eigenvalues of ``h(k)`` along the last axis."""
    return np.linalg.eigvalsh(bloch_matrix(model, k))


def band_formula(model: BlochModel, k) -> np.ndarray:
    """Closed-form bands, each listed twice, sorted along the last axis."""
    k = np.asarray(k, dtype=float)
    c1, c2 = np.cos(2 * k[..., 0]), np.cos(2 * k[..., 1])
    r = (model.m / (2 * model.t)) ** 2
    if model.cell is BlochCell.PI_FLUX_4SITE:
        e = 2 * model.t * np.sqrt(r + 1 + 0.5 * c1 + 0.5 * c2)
        bands = [-e, -e, e, e]
    else:
        s = np.sqrt(1 + c1**2 + c2**2)
        e1 = 2 * model.t * np.sqrt(r + 1 + 0.5 * s)
        e2 = 2 * model.t * np.sqrt(np.maximum(r + 1 - 0.5 * s, 0.0))
        bands = [-e1, -e1, -e2, -e2, e2, e2, e1, e1]
    return np.sort(np.stack(bands, -1), axis=-1)


def e_minus(k1, k2, m: float, t: float = 1.0):
    """Lower pi-flux band."""
    return -2 * t * np.sqrt((m / (2 * t)) ** 2 + 1 + 0.5 * np.cos(2 * k1) + 0.5 * np.cos(2 * k2))


def brillouin_zone(cell: BlochCell | BlochModel, L: int, theta: float = 0.0, phi: float = 0.0) -> np.ndarray:
    """Allowed momenta ``(2 pi / L) (n + (theta, phi) / 2 pi)``.

    ``n1 < L / 2`` for the 4-site cell and ``n1 < L / 4`` for the 8-site
    cell; ``n2 < L / 2`` for both. Returns an ``(N, 2)`` array.
    """
    if isinstance(cell, BlochModel):
        cell = cell.cell
    w1, w2 = cell.extent
    if L % w1 or L % w2:
        raise ValueError(f"L={L} is not compatible with a {w1}x{w2} cell")
    n1, n2 = np.meshgrid(np.arange(L // w1), np.arange(L // w2), indexing="ij")
    k1 = 2 * np.pi / L * (n1 + theta / (2 * np.pi))
    k2 = 2 * np.pi / L * (n2 + phi / (2 * np.pi))
    return np.stack([k1.ravel(), k2.ravel()], axis=1)


def bloch_spectrum(model: BlochModel, L: int) -> np.ndarray:
    """Sorted union of the Bloch bands over the model's Brillouin zone."""
    ks = brillouin_zone(model.cell, L, model.theta, model.phi)
    return np.sort(bloch_bands(model, ks).ravel())


# Fourier coefficients of the lower band


def _coefficient_grid(m: float, t: float, n: int) -> np.ndarray:
    k = 2 * np.pi * np.arange(n) / n
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    # periodic trapezoid: mean of samples times e^{ik.x} is an inverse FFT
    return np.fft.ifft2(e_minus(k1, k2, m, t)).real


def fourier_energy_coefficient(m: float, t: float, x, tol: float = 1e-12,
                               n_start: int = 32, n_max: int = 4096):
    """``∫ d²k / (2π)² exp(i k.x) e_-(k)`` on the torus.

    ``x`` is one integer pair or an ``(N, 2)`` array of pairs. The grid is
    doubled until the largest change is below ``tol``.
    """
    if m == 0:
        warnings.warn("m = 0: the lower band has Dirac points and decay is algebraic",
                      RuntimeWarning, stacklevel=2)
    xs = np.atleast_2d(np.asarray(x, dtype=np.int64))
    n = n_start
    while 2 * np.abs(xs).max() >= n:
        n *= 2
    prev = None
    while True:
        grid = _coefficient_grid(m, t, n)
        val = grid[xs[:, 0] % n, xs[:, 1] % n]
        if prev is not None and np.max(np.abs(val - prev)) < tol:
            break
        if n >= n_max:
            raise RuntimeError("Fourier quadrature did not converge")
        prev = val
        n *= 2
    return float(val[0]) if np.ndim(x) == 1 else val


def poisson_sum(L: int, theta: float, phi: float, m: float, t: float = 1.0, lmax: int = 3) -> complex:
    """Winding sum ``(1/4) Σ_ℓ exp(i(θℓ1 + φℓ2)) e_∞(ℓL)`` truncated at ``|ℓ_i| <= lmax``.

    Equals ``(1/L²) Σ_{k ∈ B} e_-(k)``; the factor 1/4 is the cell volume,
    since the zone holds ``L²/4`` points and ``e_-`` has period π.
    """
    ls = np.arange(-lmax, lmax + 1)
    l1, l2 = np.meshgrid(ls, ls, indexing="ij")
    coef = fourier_energy_coefficient(m, t, np.stack([l1.ravel() * L, l2.ravel() * L], 1))
    ph = np.exp(1j * (theta * l1.ravel() + phi * l2.ravel()))
    return complex(0.25 * np.sum(ph * coef))


def zone_average(L: int, theta: float, phi: float, m: float, t: float = 1.0) -> float:
    """``(1/L²) Σ_{k ∈ B_L(θ, φ)} e_-(k)``."""
    ks = brillouin_zone(BlochCell.PI_FLUX_4SITE, L, theta, phi)
    return float(e_minus(ks[:, 0], ks[:, 1], m, t).sum() / L**2)


# Decay diagnostics


@dataclass(frozen=True)
class DecayFit:
    """Exponential fit ``log y = intercept - rate * x``."""

    x: np.ndarray
    y: np.ndarray
    rate: float
    intercept: float
    r2: float


def exp_fit(x, y) -> DecayFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("exponential fit needs at least two points")
    if np.any(y <= 0):
        raise ValueError("exponential fit needs positive values")
    ly = np.log(y)
    slope, intercept = np.polyfit(x, ly, 1)
    pred = intercept + slope * x
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(x, y, float(-slope), float(intercept), r2)


def fourier_decay(m: float, t: float = 1.0, max_dist: int = 24, min_dist: int = 4) -> DecayFit:
    """Fit of ``|e_∞(x)|`` along ``x = (2j, 0)`` for ``min_dist <= 2j <= max_dist``.

    Odd components vanish identically because ``e_-`` has period π. The
    default ``min_dist`` drops the nearest point, where the power-law
    prefactor of the asymptotic decay still dominates.
    """
    xs = np.array([[2 * j, 0] for j in range(max(1, min_dist // 2), max_dist // 2 + 1)])
    coef = np.abs(fourier_energy_coefficient(m, t, xs))
    return exp_fit(xs[:, 0], coef)


def real_space_fermi_decay(h: SingleParticleHamiltonian, site: int = 0) -> DecayFit:
    """Fit ``max |P(site, y)|`` against the torus distance of ``y``.

    Distances from 1 up to ``L / 2`` are used.
    """
    s = diagonalize(h)
    if not s.projector_defined:
        raise ValueError("gapless Hamiltonian: Fermi projector is not defined")
    lat = h.lattice
    row = np.abs(s.fermi_projector[site])
    dist = np.array([lat.distance(site, y) for y in range(lat.n_vertices)])
    ds = np.arange(1, lat.L // 2 + 1)
    amp = np.array([row[dist == d].max() for d in ds])
    return exp_fit(ds, amp)
