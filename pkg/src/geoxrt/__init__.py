"""Matrix-weighted geodesic X-ray transforms on analytic disks, with desk-scale injectivity
and analytic-wavefront probes."""

from .discrete import (CGLSResult, ForwardOperator, NumericalError, apply, apply_adjoint, assemble,
                       cgls, load_operator, save_operator, sigma_extremes)
from .geometry import (AdmissibilityReport, ConformalBump, ConformalExpr, DomainError, Euclidean,
                       GeneralMetric, GeodesicPath, InfluxPoint, Metric, NontrappingReport,
                       TrappingError, UnitTangent, admissibility_check, boundary_frame, christoffel,
                       conjugate_scan, geodesic_trace, influx_fan, influx_vectors, jacobi_zeros,
                       metric_eval, metric_from_config, nontrapping_scan, rho, strict_convexity,
                       trace_batch, trace_fan)
from .lab import (HypothesisError, ProbeReport, check_hypotheses, global_probe, higgs_recover,
                  higgs_scalar_constant, layer_stripping, local_probe, oversampled_fan)
from .microlocal import (FbiResponse, PhaseSpacePoint, TestDistribution, decay_fit, fbi,
                         radon_wf_consistency, wave_packet, wf_probe)
from .pixels import PixelBasis
from .transforms import *  # noqa: F401,F403
from .transforms import __all__ as _transforms_all

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport", "CGLSResult", "ConformalBump", "ConformalExpr", "DomainError", "Euclidean",
    "FbiResponse", "ForwardOperator", "GeneralMetric", "GeodesicPath", "HypothesisError", "InfluxPoint",
    "Metric", "NontrappingReport", "NumericalError", "PhaseSpacePoint", "PixelBasis", "ProbeReport",
    "TestDistribution", "TrappingError", "UnitTangent", "admissibility_check", "apply", "apply_adjoint",
    "assemble", "boundary_frame", "cgls", "check_hypotheses", "christoffel", "conjugate_scan",
    "decay_fit", "fbi", "geodesic_trace", "global_probe", "higgs_recover", "higgs_scalar_constant",
    "influx_fan", "influx_vectors", "jacobi_zeros", "layer_stripping", "load_operator", "local_probe",
    "metric_eval", "metric_from_config", "nontrapping_scan", "oversampled_fan", "radon_wf_consistency",
    "rho", "save_operator", "sigma_extremes", "strict_convexity", "trace_batch", "trace_fan",
    "wave_packet", "wf_probe", *_transforms_all,
]
