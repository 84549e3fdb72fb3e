"""Elicit Holt-Laury risk attitudes from chat models and score how far prompts move them."""

__version__ = "0.1.0"
