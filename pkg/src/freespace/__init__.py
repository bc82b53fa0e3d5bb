"""Stereo-vision free-space detection toolkit.

A disparity stixel segmenter produces weak ground/obstacle labels which
train a small fully convolutional network, offline or online per driving
sequence. Results are scored with birds-eye-view precision/recall metrics,
and a synthetic stereo-scene generator makes the whole pipeline verifiable
at desk scale.
"""

from freespace._kernels import kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
