"""Scenario loading, the simulation loop, logs, replay and the command line."""
