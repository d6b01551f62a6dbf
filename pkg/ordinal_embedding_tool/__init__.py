"""
Ordinal Embedding Tool - Embebido ordinal a partir de comparaciones de distancias
"""

__version__ = "0.1.0"
__author__ = "Chispart Labs"
__email__ = "info@chispart.dev"
