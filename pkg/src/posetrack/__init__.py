"""Single-person pose tracking toolkit: alignment geometry, a small autograd
engine, a heatmap-supervised regression network, synthetic data and PCK
evaluation."""

__version__ = "0.1.0"
