"""Monge-Ampere measures, Alexandrov solutions and comparison principles in 2-D."""
