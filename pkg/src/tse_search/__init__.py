"""Training-free multi-step inference search for target speaker extraction.

A frozen extractor is reused at test time: candidate inputs are built by
interpolating between the original mixture and the current estimate, the
extractor runs on each candidate, a pluggable scorer ranks the outputs, and
the best one seeds the next step. Greedy selection over a candidate set that
always contains the untouched mixture makes the result provably non-worse
than one-step inference under the optimized score.
"""

from .audio import (
    DEFAULT_SAMPLE_RATE,
    Spectrogram,
    Waveform,
    interpolate,
    load_wav,
    save_wav,
    stft,
)
from .errors import (
    ConfigError,
    DegenerateReferenceError,
    DomainError,
    MergeError,
    PreconditionError,
    ShapeError,
    UnsupportedChannelsError,
    UnsupportedEncodingError,
    WavFormatError,
    WorkerCrashedError,
    WorkerError,
    WorkerFailure,
    WorkerProtocolError,
    WorkerSpawnError,
    WorkerTimeoutError,
)
from .extractors import (
    ExternalExtractor,
    Extractor,
    IdentityExtractor,
    LeakyLinearExtractor,
    SpectralSubtractionExtractor,
    extract,
    make_external,
    make_identity,
    make_leaky_linear,
    make_spectral_subtraction,
)
from .metrics import (
    EmbeddingConfig,
    SpeakerEmbedding,
    embed_speaker,
    quality_proxy,
    si_sdr,
    si_sdri,
    spk_sim,
)
from .reliability import (
    BoundCheckReport,
    LipschitzEstimate,
    check_deterministic_bound,
    check_variance_bound,
    estimate_lipschitz,
    segment_length_series,
    trajectory_lipschitz,
    verify_interpolation_identity,
)
from .scenes import MixtureScene, synthesize_scene
from .scorers import (
    ExternalScorer,
    JointScorer,
    OracleSiSdriScorer,
    QualityScorer,
    Scorer,
    SpkSimScorer,
    joint_score,
    score,
)
from .search import (
    CandidateSchedule,
    SearchConfig,
    StepRecord,
    Trajectory,
    make_schedule,
    one_step,
    run_search,
    search_step,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_SAMPLE_RATE",
    "Waveform",
    "Spectrogram",
    "interpolate",
    "load_wav",
    "save_wav",
    "stft",
    "si_sdr",
    "si_sdri",
    "embed_speaker",
    "spk_sim",
    "quality_proxy",
    "EmbeddingConfig",
    "SpeakerEmbedding",
    "MixtureScene",
    "synthesize_scene",
    "Extractor",
    "IdentityExtractor",
    "LeakyLinearExtractor",
    "SpectralSubtractionExtractor",
    "ExternalExtractor",
    "extract",
    "make_identity",
    "make_leaky_linear",
    "make_spectral_subtraction",
    "make_external",
    "Scorer",
    "OracleSiSdriScorer",
    "QualityScorer",
    "SpkSimScorer",
    "JointScorer",
    "ExternalScorer",
    "joint_score",
    "score",
    "SearchConfig",
    "CandidateSchedule",
    "StepRecord",
    "Trajectory",
    "make_schedule",
    "one_step",
    "search_step",
    "run_search",
    "LipschitzEstimate",
    "BoundCheckReport",
    "estimate_lipschitz",
    "trajectory_lipschitz",
    "check_deterministic_bound",
    "check_variance_bound",
    "segment_length_series",
    "verify_interpolation_identity",
    "ShapeError",
    "DomainError",
    "WavFormatError",
    "UnsupportedChannelsError",
    "UnsupportedEncodingError",
    "DegenerateReferenceError",
    "PreconditionError",
    "ConfigError",
    "MergeError",
    "WorkerError",
    "WorkerSpawnError",
    "WorkerProtocolError",
    "WorkerTimeoutError",
    "WorkerCrashedError",
    "WorkerFailure",
]
