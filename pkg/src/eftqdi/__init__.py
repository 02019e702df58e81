"""Distributed parameter estimation with one-bit measurements and one-bit
communication over Markov-switching directed topologies."""

__version__ = "0.1.0"
