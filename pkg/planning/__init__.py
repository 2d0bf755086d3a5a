"""STRIPS parsing, grounding and forward search."""
