"""pidlab: simulation and auto-tuning lab for decentralized digital PID
control of a two-input/two-output nonlinear plant.

Core modules: plant, pid, metrics, zn, pso, tsfuzzy, harness.  The HTTP
service lives in pidlab.service and the command-line client in pidlab.cli.
"""

__version__ = "0.1.0"
