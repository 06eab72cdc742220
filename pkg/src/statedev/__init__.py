"""Hierarchical state-diagram modeling toolkit.

Builds qualitative models of multi-parameter systems as ordered state
diagrams: predicate scales classify raw parameter vectors, a per-tick
estimator tracks each parameter's dynamics, canonical development
diagrams replay and audit object transitions, diagram composition and
consistency checking cover multi-stage plans, and a scenario engine
drives hierarchies of controllable diagrams from a timed symbol
schedule. Everything is deterministic; sampling-based validation is
the only seeded code path.
"""

__version__ = "0.1.0"
