"""Spec files, embedded example fixtures and the command line."""

from .dsl import SpecDocument, SpecError, ValidationError, load_spec, render_spec

__all__ = ["SpecDocument", "SpecError", "ValidationError", "load_spec", "render_spec"]
