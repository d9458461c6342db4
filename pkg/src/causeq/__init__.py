"""Interactive Granger-causality engine for temporal event sequences."""

from .events import (
    Dataset,
    EventRecord,
    EventSequence,
    IngestError,
    Query,
    coverage,
    event_coverage_for_edge,
    export_jsonl,
    export_sidecar,
    ingest,
    query,
    read_dataset,
    write_dataset,
)
from .hawkes import (
    CausalGraph,
    GraphEdge,
    HawkesModel,
    KernelBank,
    default_kernel_bank,
    intensity,
    kernel_integral,
    kernel_value,
    log_likelihood,
    sequence_log_likelihood,
)
from .learner import (
    FeedbackSet,
    FitConfig,
    FitReport,
    em_step,
    extract_graph,
    fit,
    penalized_objective,
    refit_with_feedback,
)
from .diagnostics import (
    DiagnosticsRecord,
    GroundTruthGraph,
    evaluate,
    scripted_feedback_experiment,
    simulate,
)
from .layout import (
    LayoutInput,
    LayoutResult,
    assign_depths,
    compute_layout,
    detect_circles,
    remove_overlaps,
    solve_positions,
)
from .patterns import (
    PatternQuery,
    PatternSummary,
    SubsequenceRow,
    aggregate,
    categorize,
    causal_path_flow,
    group_likelihood,
    order_rows,
    summarize,
)
from .history import (
    AnalysisSnapshot,
    ComparisonCell,
    SnapshotNotFound,
    SnapshotStore,
    compare,
)

__version__ = "0.1.0"
