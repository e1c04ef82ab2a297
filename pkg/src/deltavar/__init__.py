"""Numerics for the remainder Delta_k(x) of sums of d_k(n) and its short-interval variance."""
import os

# the bundled TBB is too old for numba; try OpenMP first
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

__version__ = "0.1.0"
