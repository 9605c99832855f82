"""Event-triggered impulsive rendezvous control toolkit.

Co-designs a saturated impulsive state-feedback law and its state-dependent
triggering rule by semidefinite programming, validates the closed loop
against linear (HCW with bounded noise) and nonlinear (two-body) truth
models, and benchmarks against a condensed-QP MPC baseline.
"""

__version__ = "0.1.0"
