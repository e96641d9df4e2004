"""Per-subject decision aggregation."""
