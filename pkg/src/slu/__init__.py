"""Joint slot filling and intent detection with task-interaction attention."""

__version__ = "0.1.0"
