"""
Computational services of gpcmc.
"""
