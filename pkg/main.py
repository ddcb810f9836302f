"""
sgsolve: energy-preserving sine-Gordon solver
=============================================

Cosine pseudo-spectral discretisation in space on mid-point or regular
grids, and two energy-preserving time integrators built on a shared
prediction-correction Crank-Nicolson core: a projection method and a
supplementary variable method.

Usage:
    python main.py list-cases
    python main.py run --config run.json
    python main.py convergence --case breather --axis time --scheme pepm
"""

import sys

from app.cli import main


if __name__ == "__main__":
    sys.exit(main())
