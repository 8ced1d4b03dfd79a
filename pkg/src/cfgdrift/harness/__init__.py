"""Experiment scaffolding: manifests, splits, synthetic drift, metrics, reports."""
from .manifest import ManifestRecord, read_manifest, write_manifest
from .metrics import aggregate, evaluate, evaluate_predictions
from .splits import Split, SplitSpec, check_temporal, split
from .synth import SynthParams, synth_drift

__all__ = [
    "ManifestRecord", "Split", "SplitSpec", "SynthParams", "aggregate", "check_temporal", "evaluate",
    "evaluate_predictions", "read_manifest", "split", "synth_drift", "write_manifest",
]
