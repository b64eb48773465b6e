"""
lplab

Numerical lab for Gaussian concentration of l_p norms and random
almost-Euclidean sections of l_p balls.
"""

__version__ = "0.1.0"
