"""Semi-automatic road-label transfer for stationary roadside cameras.

One manually labeled frame per camera feed is propagated to every other
frame: pairwise frequency-domain registration builds a sparse transform
graph, the best chain of transforms (highest response product) maps the
reference frame onto each target, and the label mask is warped along it.
Frames whose best chain scores below a threshold are filtered out instead
of receiving a wrong label.
"""

__version__ = "0.1.0"

from roadlabel.chaingraph import (
    ChainResult,
    GraphParams,
    RegistrationEdge,
    TransformGraph,
    build_graph,
    chain_all,
    load_graph,
    optimal_chain,
    plan_pairs,
    save_graph,
)
from roadlabel.config import PipelineConfig, load_config
from roadlabel.errors import (
    ConfigError,
    DataIOError,
    DimensionMismatchError,
    GraphError,
    InvalidTransformError,
    RegistrationError,
    RoadLabelError,
    ValidationError,
    ZeroEnergyError,
)
from roadlabel.imgcore import (
    Frame,
    LabelMask,
    SimilarityTransform,
    compose,
    invert,
    load_feed,
    load_frame,
    load_mask,
    overlay_mask,
    save_frame,
    save_mask,
    to_gray,
    warp_image,
    warp_mask,
    wrap_angle,
)
from roadlabel.ingest import FeedSource, load_sources, poll_all, poll_once, run_poller, subsample
from roadlabel.registration import (
    FMParams,
    RegistrationResult,
    fm_spectrum,
    phase_correlate,
    register,
    register_gray,
)
from roadlabel.synthbench import (
    DriftScenario,
    MetricsReport,
    evaluate_masks,
    generate_feed,
    load_scenario,
    run_benchmark,
)
from roadlabel.transfer import (
    DatasetManifest,
    FeedAnnotation,
    TransferReport,
    emit_baseline,
    emit_corrected,
    emit_reuse,
    load_annotations,
)
