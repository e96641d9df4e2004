"""Suicidal risk assessment pipeline over speech and LLM-extracted text features."""
__version__ = "0.1.0"
