"""Joint segmentation of text into statements and stance labelling."""

__version__ = "0.1.0"
