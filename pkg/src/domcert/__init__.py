"""Certificates of p-dominance and differential p-dissipativity for nonlinear systems."""

__version__ = "0.1.0"
