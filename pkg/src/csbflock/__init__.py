"""Cucker-Smale flocking with bonding force: simulation and diagnostics."""
