"""Deepfake detection with learned frequency-domain perturbation maps."""

__version__ = "0.1.0"
