"""Pilot-wave (de Broglie-Bohm) dynamics on grids, from flat-space
trajectories to homogeneous minisuperspace cosmologies."""

__version__ = "0.1.0"

from .errors import PilotWaveError  # noqa: E402,F401
from .grid import GridSpec, RealField, VectorField, WaveFunction  # noqa: E402,F401
