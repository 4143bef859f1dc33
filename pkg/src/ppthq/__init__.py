"""Hidden quantum models for PPT states with low-Schmidt-number partial transposes."""
