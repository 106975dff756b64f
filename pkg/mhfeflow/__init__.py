"""mhfeflow — fully implicit two-phase MHFE reservoir simulator with Block CPR preconditioning."""

__version__ = "1.0.0"
