"""Semi-automatic migration of Web Forms markup to function components via an intermediate model."""

__version__ = "0.1.0"
