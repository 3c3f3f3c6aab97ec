"""SNR-guided hyperspectral band selection and KMeans/NNLS spectral unmixing."""

__version__ = "0.1.0"

from .band_selection import (
    BandMask,
    SNRBandSelector,
    SnrProfile,
    apply_mask,
    band_snr,
    select_bands,
)
from .baseline_filters import (
    FourierLowpassFilter,
    FourierParams,
    HaarWaveletDenoiser,
    WaveletParams,
    compare_filters,
    fourier_lowpass,
    wavelet_denoise,
)
from .io import (
    AbundanceCube,
    HyperCube,
    SpectralLibrary,
    read_abundance_maps,
    read_cube,
    read_spectral_library,
    write_abundance_maps,
    write_cube,
    write_spectral_library,
)
from .metrics import MatchReport, cosine_similarity, match_endmembers, rmse
from .pipeline import PipelineConfig, make_unmixing_pipeline, run_pipeline
from .smoothing import (
    SavitzkyGolaySmoother,
    SgParams,
    sg_coefficients,
    sg_smooth_spectrum,
    smooth_cube,
)
from .synth import SynthConfig, SynthTruth, generate
from .unmixing import (
    EndmemberSet,
    KmeansConfig,
    KMeansEndmembers,
    NnlsSolution,
    NNLSUnmixer,
    kmeans_endmembers,
    l2_normalize,
    nnls_solve,
    unmix_cube,
)

__all__ = [
    "__version__",
    "BandMask",
    "SnrProfile",
    "SNRBandSelector",
    "apply_mask",
    "band_snr",
    "select_bands",
    "FourierLowpassFilter",
    "FourierParams",
    "HaarWaveletDenoiser",
    "WaveletParams",
    "compare_filters",
    "fourier_lowpass",
    "wavelet_denoise",
    "AbundanceCube",
    "HyperCube",
    "SpectralLibrary",
    "read_abundance_maps",
    "read_cube",
    "read_spectral_library",
    "write_abundance_maps",
    "write_cube",
    "write_spectral_library",
    "EndmemberSet",
    "KmeansConfig",
    "KMeansEndmembers",
    "NNLSUnmixer",
    "NnlsSolution",
    "kmeans_endmembers",
    "l2_normalize",
    "nnls_solve",
    "unmix_cube",
    "MatchReport",
    "cosine_similarity",
    "match_endmembers",
    "rmse",
    "PipelineConfig",
    "make_unmixing_pipeline",
    "run_pipeline",
    "SavitzkyGolaySmoother",
    "SgParams",
    "sg_coefficients",
    "sg_smooth_spectrum",
    "smooth_cube",
    "SynthConfig",
    "SynthTruth",
    "generate",
]
