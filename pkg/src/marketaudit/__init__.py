"""Misinformation audits of marketplace search results and homepage recommendations."""

__version__ = "0.1.0"
