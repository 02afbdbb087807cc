"""Model gateway: prompt templates, structured output parsing, providers."""

from .gateway import Gateway
from .providers import LiveHttpProvider, MockProvider, Provider

__all__ = ["Gateway", "LiveHttpProvider", "MockProvider", "Provider"]
