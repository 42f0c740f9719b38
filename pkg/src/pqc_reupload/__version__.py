"""Version information for pqc-reupload."""

__version__ = "0.1.0"
