"""Discrete potential theory on weighted graphs: fractional Laplacians,
Riesz kernels, Hardy weights and their criticality on finite truncations."""
from .graph import (GraphError, MetricAnnotation, WeightedGraph, apply_laplacian, build_graph,
                    dirichlet_restriction, metric_annotation, quadratic_form)
from .spectral import (HeatKernelGrid, SpectralData, SpectralError, apply_spectral_function, eigendecompose,
                       green_function, heat_kernel, survival)
from .fractional import (FractionalGraph, QuadratureError, QuadratureSpec, fractional_graph_quadrature,
                         fractional_graph_spectral, fractional_green, gamma_magnitude)
from .riesz import (HardyWeight, PencilResult, RieszKernelTable, ground_state_transform_check, hardy_weight,
                    riesz_kernel_quadrature, riesz_kernel_spectral, verify_hardy, verify_intertwining)
from .criticality import (CriticalityReport, DecompositionResult, alpha_critical, classify,
                          criticality_indicator, energy_identity_check, optimality_probe, riesz_decompose,
                          summability_scan)
from .asymptotics import (BoundCheck, ExponentFit, davies_gaffney_check, fit_exponent, hardy_exponent,
                          measure_lower_bound_check, riesz_exponent, spectral_dimension, volume_growth)

__version__ = "0.1.0"
