"""Power and noise aware wind-turbine control with double deep Q-learning."""

__version__ = "0.1.0"
