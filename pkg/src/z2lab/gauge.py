"""Static Z2 gauge fields on the edges of the torus.

A configuration assigns ``+1`` or ``-1`` to every primal edge. Gauge orbits
are labelled by the plaquette fluxes together with the holonomies ``(a, b)``
along the canonical loops ``C1`` (row 0, horizontal) and ``C2`` (column 0,
vertical).
"""

from __future__ import annotations

import base64
import io
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .topology import (
    Chain,
    Lattice,
    PRIMAL,
    _endpoints,
    _plaquette_edges,
    cycle_c1,
    cycle_c2,
    is_cycle,
)


def _vertex_mask(L: int, vertices) -> np.ndarray:
    if isinstance(vertices, Chain):
        if vertices.dim == 0 or (vertices.dim == 2 and vertices.layer != PRIMAL):
            return vertices.bits.astype(bool)
        raise ValueError("expected a vertex set")
    mask = np.zeros(L * L, dtype=bool)
    idx = np.asarray(list(vertices), dtype=np.int64)
    np.logical_xor.at(mask, idx, True)
    return mask


@dataclass(frozen=True, eq=False)
class GaugeConfig:
    """Edge variables ``sigma[e] in {+1, -1}`` indexed as in :mod:`topology`."""

    L: int
    sigma: np.ndarray = field(repr=False)

    def __post_init__(self):
        Lattice(self.L)
        s = np.asarray(self.sigma, dtype=np.int8)
        if s.shape != (2 * self.L * self.L,) or not np.all(np.abs(s) == 1):
            raise ValueError("sigma must hold 2*L*L entries equal to +-1")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)

    @classmethod
    def trivial(cls, L: int) -> "GaugeConfig":
        return cls(L, np.ones(2 * L * L, dtype=np.int8))

    def __eq__(self, other) -> bool:
        if not isinstance(other, GaugeConfig):
            return NotImplemented
        return self.L == other.L and bool(np.array_equal(self.sigma, other.sigma))

    def __hash__(self) -> int:
        return hash((self.L, self.sigma.tobytes()))

    @property
    def lattice(self) -> Lattice:
        return Lattice(self.L)

    def flipped(self, edges: Iterable[int] | Chain) -> "GaugeConfig":
        """Copy with the sign reversed on the given edges (a 1-chain or indices)."""
        s = self.sigma.copy()
        if isinstance(edges, Chain):
            mask = edges.bits.astype(bool)
        else:
            mask = np.zeros(s.size, dtype=bool)
            np.logical_xor.at(mask, np.asarray(list(edges), dtype=np.int64), True)
        s[mask] *= -1
        return GaugeConfig(self.L, s)

    def fluxes(self) -> np.ndarray:
        """Flux of every plaquette as an ``int8`` array of length ``L*L``."""
        return np.prod(self.sigma[_plaquette_edges(self.L)], axis=1).astype(np.int8)

    def holonomies(self) -> tuple[int, int]:
        """Holonomies ``(a, b)`` along ``C1`` and ``C2``."""
        return holonomy(self, cycle_c1(self.L)), holonomy(self, cycle_c2(self.L))

    def n_monopoles(self) -> int:
        """Number of zero-flux (``+1``) plaquettes."""
        return int(np.count_nonzero(self.fluxes() == 1))

    def to_json(self) -> str:
        neg = np.packbits(self.sigma == -1)
        return json.dumps({"L": self.L, "edges": base64.b64encode(neg.tobytes()).decode("ascii")})

    @classmethod
    def from_json(cls, text: str) -> "GaugeConfig":
        d = json.loads(text)
        L = int(d["L"])
        raw = np.frombuffer(base64.b64decode(d["edges"]), dtype=np.uint8)
        neg = np.unpackbits(raw)[: 2 * L * L].astype(bool)
        return cls(L, np.where(neg, -1, 1))

    def flux_csv(self) -> str:
        buf = io.StringIO()
        buf.write("i1,i2,flux\n")
        L = self.L
        for p, f in enumerate(self.fluxes()):
            buf.write(f"{p % L},{p // L},{int(f)}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class FluxSector:
    """Gauge-orbit label: plaquette fluxes plus holonomies ``(a, b)``."""

    L: int
    fluxes: tuple
    a: int
    b: int

    def __post_init__(self):
        f = tuple(int(x) for x in self.fluxes)
        if len(f) != self.L * self.L or any(x not in (1, -1) for x in f):
            raise ValueError("fluxes must hold L*L entries equal to +-1")
        if self.a not in (1, -1) or self.b not in (1, -1):
            raise ValueError("holonomies must be +-1")
        object.__setattr__(self, "fluxes", f)

    @property
    def n_monopoles(self) -> int:
        return sum(1 for x in self.fluxes if x == 1)


def flux(g: GaugeConfig, p: int) -> int:
    """Product of ``sigma`` around plaquette ``p``."""
    return int(np.prod(g.sigma[_plaquette_edges(g.L)[p]]))


def holonomy(g: GaugeConfig, c: Chain) -> int:
    """Product of ``sigma`` over a primal 1-cycle."""
    if c.dim != 1 or c.layer != PRIMAL:
        raise ValueError("holonomy needs a primal 1-chain")
    if not is_cycle(c):
        raise ValueError("holonomy is defined on cycles only")
    return int(np.prod(g.sigma[c.bits.astype(bool)]))


def gauge_transform(g: GaugeConfig, vertices) -> GaugeConfig:
    """Apply ``A_Λ``: flip every edge with exactly one endpoint in ``Λ``.

    ``vertices`` is a 0-chain or an iterable of vertex indices.
    """
    mask = _vertex_mask(g.L, vertices)
    t, h = _endpoints(g.L)
    cut = mask[t] ^ mask[h]
    s = g.sigma.copy()
    s[cut] *= -1
    return GaugeConfig(g.L, s)


def classify(g: GaugeConfig) -> FluxSector:
    a, b = g.holonomies()
    return FluxSector(g.L, tuple(g.fluxes()), a, b)


def canonical_rep(s: FluxSector) -> GaugeConfig:
    """Deterministic representative of a sector.

    The vertical edges ``v(0, i2)`` for ``i2 < L-1`` and the horizontal
    edges ``h(i1, i2)`` for ``i1 < L-1`` are set to ``+1``. The edges
    ``h(L-1, 0)`` and ``v(0, L-1)`` carry the holonomies, and the remaining
    edges are solved plaquette by plaquette, row by row.
    """
    L = s.L
    f = np.asarray(s.fluxes, dtype=np.int64)
    if np.prod(f) != 1:
        raise ValueError("flux assignment has product -1, violates the torus constraint")
    lat = Lattice(L)
    sig = np.ones(2 * L * L, dtype=np.int64)
    sig[lat.edge(0, L - 1, 1)] = s.b
    sig[lat.edge(L - 1, 0, 0)] = s.a
    for i2 in range(L):
        for i1 in range(1, L):
            p = lat.plaquette(i1 - 1, i2)
            sig[lat.edge(i1, i2, 1)] = (
                f[p] * sig[lat.edge(i1 - 1, i2, 0)] * sig[lat.edge(i1 - 1, i2 + 1, 0)]
                * sig[lat.edge(i1 - 1, i2, 1)]
            )
        if i2 < L - 1:
            p = lat.plaquette(L - 1, i2)
            sig[lat.edge(L - 1, i2 + 1, 0)] = (
                f[p] * sig[lat.edge(L - 1, i2, 0)] * sig[lat.edge(L - 1, i2, 1)]
                * sig[lat.edge(0, i2, 1)]
            )
    return GaugeConfig(L, sig)


def sector_count(L: int) -> int:
    return 2 ** (L * L + 1)


def iter_sectors(L: int) -> Iterator[FluxSector]:
    """All sectors in a fixed order: fluxes of the first ``L*L - 1`` plaquettes
    enumerated as binary counters, then ``(a, b)``."""
    n = L * L
    for code in range(2 ** (n - 1)):
        bits = [(code >> k) & 1 for k in range(n - 1)]
        fl = [1 - 2 * x for x in bits]
        fl.append(int(np.prod(fl)) if fl else 1)
        for a, b in itertools.product((1, -1), repeat=2):
            yield FluxSector(L, tuple(fl), a, b)


def _flip_cocycles(L: int, sig: np.ndarray, a: int, b: int) -> np.ndarray:
    lat = Lattice(L)
    if a == -1:
        for i2 in range(L):
            sig[lat.edge(L - 1, i2, 0)] *= -1
    if b == -1:
        for i1 in range(L):
            sig[lat.edge(i1, L - 1, 1)] *= -1
    return sig


def _check_holonomy(a: int, b: int):
    if a not in (1, -1) or b not in (1, -1):
        raise ValueError("holonomies must be +-1")


def pi_flux_background(L: int, a: int = 1, b: int = 1) -> GaugeConfig:
    """Every plaquette carries flux ``-1``; holonomies ``(a, b)``.

    The ``(1, 1)`` layout sets the horizontal edges of even rows to ``-1``.
    ``a = -1`` flips the horizontal edges ``h(L-1, .)`` crossed by ``C2*``;
    ``b = -1`` flips the vertical edges ``v(., L-1)`` crossed by ``C1*``.
    """
    _check_holonomy(a, b)
    lat = Lattice(L)
    sig = np.ones(lat.n_edges, dtype=np.int64)
    for i2 in range(0, L, 2):
        for i1 in range(L):
            sig[lat.edge(i1, i2, 0)] = -1
    return GaugeConfig(L, _flip_cocycles(L, sig, a, b))


def chessboard_background(L: int, a: int = 1, b: int = 1) -> GaugeConfig:
    """The staggered configuration ``sigma*`` built from a 4 x 2 cell.

    Horizontal edges of even rows are ``-1``; on odd rows the vertical edges
    ``v(i1, i2)`` with ``i1 % 4`` in ``{1, 2}`` are ``-1``. Zero-flux
    plaquettes sit at even ``i1`` and odd ``i2``: one plaquette in four.
    """
    _check_holonomy(a, b)
    if L % 4:
        raise ValueError("chessboard background needs L divisible by 4")
    lat = Lattice(L)
    sig = np.ones(lat.n_edges, dtype=np.int64)
    for i2 in range(L):
        for i1 in range(L):
            if i2 % 2 == 0:
                sig[lat.edge(i1, i2, 0)] = -1
            elif i1 % 4 in (1, 2):
                sig[lat.edge(i1, i2, 1)] = -1
    return GaugeConfig(L, _flip_cocycles(L, sig, a, b))
