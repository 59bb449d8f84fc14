"""Numerical laboratory for meromorphic functions omitting three values in
perturbed half-planes: half-plane Nevanlinna characteristics, the modular
function lambda, tame profiles, Riemann maps of graph domains, orbit
counting and harmonic-measure comparisons."""

__version__ = "0.1.0"
