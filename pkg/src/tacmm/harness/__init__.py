"""Experiment harness: configs, suites, reports and the command line."""
