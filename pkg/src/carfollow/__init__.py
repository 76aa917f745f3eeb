"""Driving-style-aware car-following: data pipeline, per-style acceleration
regressors, IDM baselines, and a safety-constrained soft actor-critic
longitudinal controller."""

__version__ = "0.1.0"
