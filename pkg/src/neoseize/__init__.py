"""Resource-budgeted neonatal seizure detection from multi-channel EEG."""

__version__ = "0.1.0"
