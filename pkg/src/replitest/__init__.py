"""Replicable hypothesis testers for discrete distributions and Gaussian means."""
