"""Spatial mediation analysis: OLS screening, Moran's I, GWR/MGWR and
location-specific direct, indirect and total effects."""

__version__ = "0.1.0"

from .core_model import (
    Dataset,
    ModelSpec,
    ScalingInfo,
    Schema,
    SpatialSample,
    load_dataset,
    standardize,
    unstandardize,
)
from .errors import GeomediateError
from .gwr import (
    GwrFit,
    KernelSpec,
    adaptive_bandwidth_distance,
    aicc,
    golden_section_search,
    gwr_fit,
    kernel_weight,
    select_bandwidth,
)
from .mediation import (
    FitIndices,
    MediationEffects,
    SpatialMediationFit,
    fit_global_mediation,
    fit_spatial_mediation,
    fit_verdicts,
    mediation_decompose,
    path_fit_indices,
)
from .mgwr import MgwrConfig, MgwrFit, NonConvergenceWarning, mgwr_fit, soc_f
from .regress import OlsFit, ScreeningTable, ols_fit, screen_predictors, vif
from .spatial_weights import (
    MoranResult,
    WeightsMatrix,
    distance_matrix,
    knn_weights,
    morans_i,
)
from .surfaces import Raster, export_geojson, idw_interpolate, make_grid, render_svg_heatmap
from .synth import Field, SynthConfig, TruthBundle, gen_synthetic, surface_rmse

__all__ = [
    "Dataset",
    "ModelSpec",
    "ScalingInfo",
    "Schema",
    "SpatialSample",
    "load_dataset",
    "standardize",
    "unstandardize",
    "GwrFit",
    "KernelSpec",
    "adaptive_bandwidth_distance",
    "aicc",
    "golden_section_search",
    "gwr_fit",
    "kernel_weight",
    "select_bandwidth",
    "FitIndices",
    "MediationEffects",
    "SpatialMediationFit",
    "fit_global_mediation",
    "fit_spatial_mediation",
    "fit_verdicts",
    "mediation_decompose",
    "path_fit_indices",
    "MoranResult",
    "WeightsMatrix",
    "distance_matrix",
    "knn_weights",
    "morans_i",
    "GeomediateError",
    "MgwrConfig",
    "MgwrFit",
    "NonConvergenceWarning",
    "mgwr_fit",
    "soc_f",
    "OlsFit",
    "ScreeningTable",
    "ols_fit",
    "screen_predictors",
    "vif",
    "Raster",
    "export_geojson",
    "idw_interpolate",
    "make_grid",
    "render_svg_heatmap",
    "Field",
    "SynthConfig",
    "TruthBundle",
    "gen_synthetic",
    "surface_rmse",
]
