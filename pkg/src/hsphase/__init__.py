"""Broadband hyperspectral phase retrieval from coded total-intensity patterns."""

from .cube import SpectralGrid, cube_inner, cube_norm2, read_cube, read_real, uniform_band, write_cube, write_real
from .denoise import FilterSpec, apply_filter, relax, spectral_svd_filter
from .masks import MaskSet, make_mask_set
from .metrics import ErrorTrace, channel_errors, empirical_snr_db, relative_error, support_mask
from .optics import (
    DispersionModel,
    TransferFunctionSet,
    angular_spectrum_tf,
    make_transfer_functions,
    propagate,
    transmittance,
)
from .phantoms import ObjectSpec, build_object_cube, load_image, make_phantom
from .prox import cubic_real_roots, gaussian_prox, poisson_prox, quadratic_real_roots
from .sensing import (
    NoiseSpec,
    add_gaussian,
    add_poisson,
    chi_for_snr,
    forward_intensities,
    forward_intensity,
    observe,
    sigma_for_snr,
)
from .solver import RunResult, SolverConfig, SolverState, backward_estimate, init_state, run, step

__version__ = "0.1.0"
