"""On-disk caches and representation stores."""
