"""Static security auditing of CI workflow files across a project's supply chain."""

__version__ = "0.1.0"
