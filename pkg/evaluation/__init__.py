"""Benchmark harness and oracle checks."""
