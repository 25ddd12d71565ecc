"""Packaged scenario files for the simulate subcommand."""
