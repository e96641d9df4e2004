"""Encoders, classification heads, training and fusion."""
