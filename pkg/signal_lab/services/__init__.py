"""Service layer: signal programs, the GPA solver, controllers, simulation and experiments."""
