"""FastAPI service exposing simulation, recovery, sweeps and bounds."""
