"""previz: script-to-storyboard pre-visualization engine."""

__version__ = "0.1.0"
