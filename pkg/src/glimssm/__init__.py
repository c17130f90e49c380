"""Sequential glimpse-based image classification on a selective SSM backbone."""

__version__ = "0.1.0"
