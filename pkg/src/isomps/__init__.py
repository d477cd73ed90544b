"""Iso-recursive multiparty session types: syntax, semantics, type checking
and a terminating compliance check for session environments."""

__version__ = "0.1.0"
