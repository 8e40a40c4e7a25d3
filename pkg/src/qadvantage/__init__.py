"""Quantum-advantage evaluation for PCA-based network anomaly detection.

The toolkit classically simulates the bounded errors of fault-tolerant
quantum subroutines (tomography, phase/amplitude estimation, noisy PCA
extraction, q-means), measures the dataset parameters that enter the
quantum query-complexity formulas, and locates the dataset sizes where
quantum query counts beat classical operation counts, including a QRAM
hardware-cost model.
"""

__version__ = "0.1.0"
