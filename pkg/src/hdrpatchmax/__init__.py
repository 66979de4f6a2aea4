"""HDRPatchMAX no-reference video quality features, regression and evaluation tools."""

__version__ = "0.1.0"
