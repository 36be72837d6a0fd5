"""Experiment harness: targets, risk estimation, rate fits and geometry checks."""
