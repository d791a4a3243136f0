"""FastAPI service wrapping the simulator core."""
