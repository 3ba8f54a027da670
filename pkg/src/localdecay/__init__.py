"""Per-mode wave evolution, resolvent and decay-rate laboratory.

Subpackages and modules: :mod:`geometry` (backgrounds, tortoise
normalization, mode potentials), :mod:`norms` (dyadic weighted norms),
:mod:`evolve` (time-domain evolution), :mod:`resolvent` (frequency domain),
:mod:`synthesis` (Fourier inversion) and :mod:`cli`.
"""

__version__ = "0.1.0"
