"""Link-level PHY simulation of IEEE 802.11p and C-V2X sidelink over
vehicular tapped-delay-line channels."""

__version__ = "0.1.0"
