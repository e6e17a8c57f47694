"""Near-field spatial channel modelling for planar receive arrays.

Disk-shaped scatterer clusters and their closed-form spatial correlation
drive everything else here: Gaussian channel sampling, wavenumber analysis,
degree-of-freedom bounds, channel estimators and cluster-parameter fitting.
"""

from .correlation import (
    CorrelationKernel,
    CorrelationMatrix,
    assemble_matrix,
    assemble_on_points,
    corr_analytic,
    corr_multi,
    corr_oracle,
    relative_error,
)
from .dof import DofReport, bandwidth_bounds, cap_dof_bounds, dof_report, effective_dof
from .estimators import (
    Codebook,
    EstimatorReport,
    LSEstimator,
    MMSEEstimator,
    NFSEstimator,
    Observation,
    OMPEstimator,
    SubspaceEstimator,
    analytic_mse,
    build_codebook,
    estimate_ls,
    estimate_nfs,
    estimate_omp,
    estimate_subspace,
    make_observation,
    nmse,
)
from .exceptions import (
    ConfigError,
    DegenerateGeometryError,
    InvalidArgumentError,
    NotPSDError,
    QuadratureError,
)
from .fitting import (
    CorrelationModelFitter,
    FitProblem,
    FitTrace,
    fit_loss,
    quasi_newton_fit,
    ray_cluster_target,
)
from .geometry import ArrayGeometry, ScattererCluster, Scene, Wave, facing_cluster
from .synthesis import (
    ChannelRealization,
    EigenSystem,
    GaussianFieldSampler,
    eigen_system,
    mutual_information,
    sample_channel,
)
from .wavenumber import (
    FieldRegime,
    SpectrumGrid,
    classify_regime,
    detect_peaks,
    expected_spectrum,
    sample_spectrum,
)

__version__ = "0.1.0"
