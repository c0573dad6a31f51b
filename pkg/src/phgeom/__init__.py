"""Para-hyperhermitian geometry on split-signature four-manifolds."""
