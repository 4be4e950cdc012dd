"""Probability distributions, classifiers and dimension reduction on SPD matrices
under the affine-invariant Riemannian metric."""

from . import classify, dimred, distributions, geometry, io, outlier
from .classify import ClassModel, fit, predict_bayes, predict_mdm
from .dimred import PcaProjector, TsneConfig, pca_fit, pca_project, tsne_embed
from .distributions import (
    IsotropicGaussian,
    WrappedGaussian,
    ZetaTable,
    build_zeta_table,
    iso_fit,
    iso_sample,
    jacobian_det,
    wg_fit_mle,
    wg_fit_moments,
    wg_sample,
)
from .errors import (
    ConvergenceError,
    DatasetError,
    DimensionError,
    NotSPDError,
    NumericalError,
    SpdError,
)
from .geometry import airm_distance, exp_map, frechet_mean, log_map
from .io import LabeledDataset, load_dataset, load_json, save_dataset, save_json
from .outlier import PotatoState, potato_accept, potato_calibrate, potato_update

__version__ = "0.1.0"
