"""Topic modeling of short informal texts with and without LLM rephrasing."""

__version__ = "0.1.0"
