"""Weighted delay-and-sum beamforming."""

from beamsteer.wdsbf.pipeline import (
    MODES,
    BeamformerConfig,
    Diagnostics,
    UsageError,
    adapt_channel_weights,
    aoi_to_delay_track,
    beamform_sum,
    frame_grid,
    frame_xcorr,
    run_pipeline,
    select_reference,
    steering_candidates,
)
from beamsteer.wdsbf.tdoa import TdoaCandidateSet, gcc_phat, gcc_phat_candidates
from beamsteer.wdsbf.viterbi import DelayTrack, best_path, viterbi_delay_selection
from beamsteer.wdsbf.wiener import wiener_prefilter

__all__ = [
    "MODES", "BeamformerConfig", "DelayTrack", "Diagnostics", "TdoaCandidateSet",
    "UsageError", "adapt_channel_weights", "aoi_to_delay_track", "beamform_sum",
    "best_path", "frame_grid", "frame_xcorr", "gcc_phat", "gcc_phat_candidates",
    "run_pipeline", "select_reference", "steering_candidates", "viterbi_delay_selection", "wiener_prefilter",
]
