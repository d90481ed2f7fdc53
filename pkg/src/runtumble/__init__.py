"""Two-velocity run-and-tumble chemotaxis in the frame of the chemoattractant peak."""

__version__ = "0.1.0"
