"""Cross-diffusion predator-prey food chains: simulation, fast-reaction limits, Turing analysis."""

__version__ = "0.1.0"
