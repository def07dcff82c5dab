"""Trajectory PHD/CPHD filters for elliptical extended targets."""
