"""Planning-based goal recognizers."""
