"""AD/HC classification on volumes and structural connectomes with a
Grad-CAM relevance-analysis pipeline."""

__version__ = "0.1.0"
