"""
Process exit codes of the command-line harness.
"""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4
EXIT_GRIDLOCK = 5
