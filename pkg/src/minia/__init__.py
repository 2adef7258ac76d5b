"""minia: evaluation harness for single-image 3D reconstruction of flat artwork.

The interesting property of this domain is that there is no ground
truth: the input is a photo of an essentially two-dimensional painted
figure, so quality has to be judged against the image itself
(silhouette overlap, perceptual similarity), against geometric priors
(flatness), against mesh hygiene (watertightness), and against human
preferences from paired-comparison studies.
"""

from .errors import (
    DegenerateBox,
    DegenerateProjection,
    DimensionMismatch,
    EmptyInput,
    EmptyMesh,
    InsufficientRaters,
    MalformedFile,
    ManifestInvalid,
    MiniaError,
    OrphanTrialId,
    ProtocolViolation,
    ScorerError,
    ScorerUnavailable,
    Timeout,
    TooFewMethods,
    UnsupportedFormat,
)
from .harness import (
    DatasetManifest,
    FigureEntry,
    Report,
    load_manifest,
    read_report,
    render_table,
    run_eval,
    write_report,
)
from .mesh import (
    Aabb,
    TriangleMesh,
    apply_transform,
    compute_aabb,
    mesh_from_arrays,
    save_obj,
)
from .mesh_io import load_mesh
from .metrics import (
    AggregateRow,
    MetricRecord,
    aggregate,
    depth_range_ratio,
    evaluate_figure,
    silhouette_iou,
)
from .orient import (
    OrientationCandidate,
    OrientationResult,
    detect_orientation,
    enumerate_candidates,
    thinnest_axis,
)
from .raster import (
    ReferenceImage,
    RenderConfig,
    RenderOutput,
    alpha_mask,
    composite_on_gray,
    encode_png,
    frame_reference,
    load_reference,
    render,
    save_png,
)
from .scorer import (
    HttpScorer,
    PerceptualScorer,
    StubScorer,
    SubprocessScorer,
    scorer_from_spec,
)
from .study import (
    ConcordanceResult,
    IssuedTrial,
    PlannedTrial,
    Scheduler,
    TrialResponse,
    WinTable,
    append_response,
    concordance_by_dataset,
    generate_plan,
    kendalls_w,
    kendalls_w_from_ranks,
    load_plan,
    next_trial,
    read_log,
    save_plan,
    win_table,
)
from .study_service import StudyService, make_server
from .topology import (
    TopologyReport,
    analyze_topology,
    euler_characteristic,
    watertight_percentage,
)

__version__ = "0.1.0"
