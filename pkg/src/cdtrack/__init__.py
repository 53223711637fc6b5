"""Correlation-filter tracking with online good-channel distillation."""

from .dcf import (
    ChannelSelection,
    FreqFilter,
    TrainingSet,
    locate,
    loss,
    response,
    solve_filter,
)
from .distill import (
    SelectionSearchState,
    alternate,
    build_search_state,
    distill_channels,
    selection_loss,
    swap_search,
)
from .factorized import Projection, distill_projected, pca_projection, project
from .features import (
    FeatureSpec,
    Patch,
    extract_patch,
    featurize,
    load_feature_file,
    read_sequence,
    save_feature_file,
    write_sequence,
)
from .fourier import circ_correlate, dft2, idft2
from .friendliness import (
    FriendlinessReport,
    average_friendliness,
    friendliness,
    prune_loop,
    selection_quality,
    spatial_score,
    temporal_score,
)
from .labels import LabelConfig, gaussian_label
from .metrics import TrackResult, center_error, iou, precision_curve, success_curve
from .synth import SynthSpec, generate_sequence, noisy_channel_provider
from .tracker import Tracker, TrackerConfig, run_sequence

__version__ = "0.1.0"
