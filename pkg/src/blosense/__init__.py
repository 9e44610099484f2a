"""Sub-SQL detection of a weak tone with broadband squeezing and a bichromatic LO."""

__version__ = "0.1.0"
