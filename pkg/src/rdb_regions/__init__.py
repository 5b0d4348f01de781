"""Rate-distortion-bandwidth regions for lossy source coding with broadcast side information."""
__version__ = "0.1.0"
