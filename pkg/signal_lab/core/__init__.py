"""Core modules: settings, logging, errors and exit codes."""
