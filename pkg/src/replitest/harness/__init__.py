"""Experiment harness: replicability measurement, canonical wrappers, reports and CLI."""
