"""Error estimation and simulation for an Ising spin-chain quantum computer."""
