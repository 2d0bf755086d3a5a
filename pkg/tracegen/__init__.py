"""Domain templates, plan traces and datasets."""
