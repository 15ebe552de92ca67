"""Graph CNN workbench: GSP primitives, GCN/TAGCN layers, pooling, readout and edge entropy."""

from .graph import (
    Graph,
    Permutation,
    add_self_loops,
    average_degree,
    degree_matrix,
    diameter,
    erdos_renyi,
    normalize_spectral,
    normalize_sym,
    permute,
    permute_signal,
    ring_graph,
    sbm,
)
from .gsp import FilterCoeffs, Spectrum, gft_apply, igft_apply, poly_filter, shift, spectral_filter, spectrum

__version__ = "0.1.0"
