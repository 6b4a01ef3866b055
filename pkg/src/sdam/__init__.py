"""Training-free video object segmentation pipeline toolkit."""

__version__ = "0.1.0"
