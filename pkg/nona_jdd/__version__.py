name = "nona_jdd"
__version__ = "1.0.0"
