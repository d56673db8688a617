"""Distribution-network MILP with reconfiguration, DER scheduling and EV demand synthesis."""
__version__ = "0.1.0"
