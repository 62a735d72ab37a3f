"""vfab: a reusable, coverage-driven functional verification framework."""

__version__ = "0.1.0"
