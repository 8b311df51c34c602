"""Receive-side processing: detection, sparse recovery, demodulation, pipelines."""

from .angles import SineEstimate, estimate_sine, steering_atoms, virtual_snapshot
from .demod import (DpskDemod, apply_excision, demod_delays, demod_dpsk,
                    doppler_compensation, power_map, range_dft,
                    refine_row_offset, remove_beta, remove_delays,
                    slow_coherence)
from .detection import (CfarParams, Cluster, ClutterReport, cfar_1d, cfar_2d,
                        cluster, filter_clutter)
from .pipeline import (AtFrameResult, EstimationDebug, PtFrameResult,
                       ReceiverParams, TargetEstimate, TrackHint,
                       estimate_scene, pipeline_at, pipeline_pt)
from .sparse import OmpResult, dft_top_k, doppler_atoms, omp_batch

__all__ = [
    "SineEstimate", "estimate_sine", "steering_atoms", "virtual_snapshot",
    "DpskDemod", "apply_excision", "demod_delays", "demod_dpsk",
    "doppler_compensation", "power_map", "range_dft",
    "refine_row_offset", "remove_beta", "remove_delays", "slow_coherence",
    "CfarParams", "Cluster", "ClutterReport", "cfar_1d", "cfar_2d",
    "cluster", "filter_clutter",
    "AtFrameResult", "EstimationDebug", "PtFrameResult", "ReceiverParams",
    "TargetEstimate", "TrackHint", "estimate_scene", "pipeline_at", "pipeline_pt",
    "OmpResult", "dft_top_k", "doppler_atoms", "omp_batch",
]
