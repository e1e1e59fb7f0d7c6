"""Spec files, builtins and the ``pd`` command line."""
from .spec import SystemSpec, builtin_names, load_spec

__all__ = ["SystemSpec", "builtin_names", "load_spec"]
