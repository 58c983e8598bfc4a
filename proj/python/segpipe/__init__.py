"""Volumetric CT segmentation pipeline utilities.

Thin wrapper over the native extension. Arrays are exchanged as numpy
float64 with shape (z, y, x); the linear layout is x-fastest.
"""

from segpipe._segpipe import (  # noqa: F401
    SegpipeError,
    Volume,
    apply_merge,
    as_label,
    binarize,
    body_mask_threshold,
    clamp_window,
    confusion,
    crop,
    default_window,
    dice,
    edt,
    emit_plan,
    evaluate_case,
    fit_bbox,
    from_numpy,
    generate_phantom,
    head_neck_preset,
    inventory,
    label_components,
    largest_component,
    nsd,
    overlap_scores,
    read_volume,
    restore,
    surface,
    threshold_segment,
    write_volume,
    zscore,
)

__version__ = "0.1.0"
