"""Speech-unit tokenization, echo-training loss kernels, streaming triggers and data QC."""

from .codebook import Codebook, assign, train_codebook
from .dataqc import TranscriptPair, corpus_stats, filter_corpus, wer
from .losses import (
    AdapterParams,
    LossBreakdown,
    combined_loss,
    denoising_loss,
    echo_loss,
    grad_check,
    s2t_loss,
)
from .pipeline import ToyDecoder, ToySystem, echo_training_step, greedy_decode, make_pseudo_labels
from .segmenter import (
    SegmentedSequence,
    TokenVocabulary,
    compression_report,
    segment,
    segment_brute_force,
)
from .streamer import StreamDecision, TriggerConfig, latency_report, similarity_series, stream_segment
from .unitlm import SpanModel, span_log_prob, train_span_model
from .unitseq import UnitSequence, dedup_adjacent, length_ratio

__version__ = "0.1.0"
