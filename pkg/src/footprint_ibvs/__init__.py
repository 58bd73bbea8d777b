"""Robot footprint estimation for camera-guided mobile robots."""

__version__ = "0.1.0"
