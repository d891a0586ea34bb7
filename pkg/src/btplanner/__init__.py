"""Interactive behavior-tree task planning, execution, and comparison."""

__version__ = "0.1.0"
