"""Sparse signal processing toolkit.

Submodules: core (transforms, linear algebra, RNG), sampling (iterative
recovery, IMAT, Dirac streams), codes (real-field block and convolutional
codes), spectral (Prony/Pisarenko/MUSIC), arrays (ULA, MDL, sparse
layouts), sca (underdetermined sparse solvers), ofdm (pilot-based channel
estimation), experiments (the figure-reproduction registry).
"""

__version__ = "0.1.0"
