"""Neural text simplification with back-translation data augmentation."""

__version__ = "0.1.0"
