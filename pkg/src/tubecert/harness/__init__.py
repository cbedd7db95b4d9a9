"""Datasets, training and the experiment pipeline behind the ``tubecert`` CLI."""
