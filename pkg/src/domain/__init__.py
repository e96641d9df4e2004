"""Corpus records, manifests and the marker lexicon."""
