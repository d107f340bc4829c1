"""One module per cli verb, each exposing ``register`` and ``handle``."""
