"""he-zoo: reference implementations of eight homomorphic encryption constructions in ten variants"""

__version__ = "0.1.0"
