"""Z2 lattice gauge field coupled to spinful lattice fermions on the torus.

Submodules
----------
topology   chains, boundaries, homology and intersection numbers
gauge      gauge configurations, flux sectors and canonical representatives
strings    binary-symplectic algebra of string, charge and fermion operators
spectral   real-space and Bloch single-particle spectra, Fourier decay
thermo     free energies, monopole mass, crossover, holonomy splitting
flux       twisted families, projector transport, loop operators, braiding
manybody   exact many-body oracle on the L = 2 torus
cli        command-line front end
"""

__version__ = "0.1.0"
