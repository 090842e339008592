"""Two-view discriminant canonical-correlation convolution network.

Filters are learned layer by layer from labelled view pairs via streaming,
batch-partitioned moment accumulation; deep features come from sign-hashing
the final maps and encoding per-block code histograms by self-information.
"""

from .cascade import (
    LayerConfig,
    LayerOutput,
    NetworkConfig,
    conv2d,
    forward,
    forward_stacks,
    train_layer,
    train_network,
)
from .classify import ClassifierModel, EvalReport, evaluate, fit, predict, predict_many
from .config import PipelineConfig, load_config, parse_config_text
from .dataset import (
    ViewPairDataset,
    ViewPairSample,
    load_dataset,
    load_matrix_csv,
    load_pgm,
    write_pgm,
)
from .encoder import (
    EncoderConfig,
    FeatureVector,
    binarize,
    encode_sample,
    encode_view,
    feature_length,
    hash_combine,
    iq_block_features,
)
from .errors import (
    ConfigError,
    CorruptModelError,
    DdccanetError,
    EmptyDatasetError,
    IoError,
    NumericalError,
    ParseError,
    RecipeError,
    ShapeError,
)
from .execution import ExecSettings, Executor
from .model_io import ModelArtifact, load_model, save_model
from .moments import (
    DiscriminantMoments,
    MomentAccumulator,
    accumulate_batch,
    finalize,
    merge,
    pairwise_merge,
    parallel_accumulate,
)
from .patches import BatchSpec, PatchGeometry, PatchMatrix, batch_partition, extract_patch_stack, extract_patches
from .solver import CanonicalPairs, FilterBank, FilterLayer, inv_sqrt, reshape_filters, solve_dcca, sym_eig
from .views import ViewRecipe, apply_recipe, lbp_map

__version__ = "0.1.0"
