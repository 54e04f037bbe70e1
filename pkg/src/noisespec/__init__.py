"""noisespec: machine-learned noise spectroscopy of dissipative TLS dynamics.

Simulates open two-level-system dynamics (exact pure dephasing and
numerically exact spin-boson hierarchy propagation), labels trajectories
with bath parameters and a trace-distance non-Markovianity score, and
trains/evaluates from-scratch ML models (random forest, SVR, FFNN) that
recover those labels from the trajectories alone.
"""

__version__ = "0.1.0"
