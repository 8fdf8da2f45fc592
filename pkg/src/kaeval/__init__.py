"""kaeval: kernel-analysis scoring of feature representations.

Scores any feature space by how much of a labelling task the leading kernel
principal components explain, summarized as the area under the accuracy
versus normalized-complexity curve (KA-AUC). Includes the subset evaluation
protocol, spike-count preprocessing, site-count extrapolation, and a random
search harness with transfer analysis.
"""

__version__ = "0.1.0"

from .dataset import (
    AlignedDataset,
    DatasetManifest,
    FeatureSet,
    LabelFrame,
    Variation,
    align,
    load_feature_matrix,
    load_labels,
    load_manifest,
    save_feature_matrix,
    save_labels,
)
from .errors import ValidationError
from .extrapolation import (
    SamplingCurve,
    SaturationFit,
    fit_saturation,
    fit_saturation_points,
    predict_auc,
    subsample_sites_auc,
)
from .kernel import (
    DEFAULT_QUANTILES,
    ENCODINGS,
    DistanceMatrix,
    EigenBasis,
    KACurve,
    KAResult,
    KernelMatrix,
    LabelMatrix,
    SigmaCandidates,
    eigendecompose,
    encode_labels,
    evaluate_dataset,
    gaussian_kernel,
    ka_auc,
    ka_curve,
    loss_curve_for_sigma,
    pairwise_sq_distances,
    sigma_candidates,
)
from .neural import (
    PreprocConfig,
    RepetitionTable,
    ZeroVariancePolicy,
    build_neural_features,
    load_repetition_table,
)
from .protocol import (
    ComparisonReport,
    ProtocolReport,
    SubsetSpec,
    compare,
    make_subsets,
    merge_reports,
    run_protocol,
)
from .search import (
    ChoiceDim,
    IntDim,
    ParamSpace,
    SearchRecord,
    UniformDim,
    make_demo_evaluator,
    random_search,
    select_top,
    transfer_correlation,
)
from .synth import SynthSpec, generate, oracle_curve, oracle_min_curve

__all__ = [name for name in dir() if not name.startswith("_")]
