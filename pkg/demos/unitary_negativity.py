"""Negativity from a squeezed state under the bare Kerr Hamiltonian.

Run with ``python demos/unitary_negativity.py``. Prints N(tau) for two
squeezing factors next to the large-squeezing limit; on the rescaled clock
``tau = g t s^4`` the three columns nearly coincide.
"""

import numpy as np

from squeezekerr.asymptotic import AsymptoticParams, asymptotic_negativity
from squeezekerr.dynamics import evolve_unitary
from squeezekerr.fock import SqueezeSpec, make_squeezed_vacuum, suggest_n_max
from squeezekerr.wigner import PhaseSpaceGrid, negativity, wigner_of_density

grid = PhaseSpaceGrid(10.0, 1 / 40)
taus = np.linspace(0.0, 2.0, 9)

# squeezed vacua: Var(X) = 1/(4 s^2), Var(Y) = s^2/4
states = {s: make_squeezed_vacuum(SqueezeSpec(s), suggest_n_max(s)) for s in (4.5, 6.0)}

print(f"{'tau':>6} {'N s=4.5':>10} {'N s=6':>10} {'N s->inf':>10}")
for tau in taus:
    row = []
    for s, psi in states.items():
        # the Kerr phase exp(-i g t (n^2 - n)) is exact in the Fock basis
        psi_t = evolve_unitary(psi, 1.0, tau / s**4)
        row.append(negativity(wigner_of_density(psi_t, grid)))
    row.append(asymptotic_negativity(AsymptoticParams.from_ratios(tau)))
    print(f"{tau:6.2f} " + " ".join(f"{v:10.5f}" for v in row))

# The revival: n(n-1) is even, so g t = pi returns the initial state exactly.
psi = states[4.5]
back = evolve_unitary(psi, 1.0, np.pi)
print("revival overlap at g t = pi:", abs(np.vdot(psi.amplitudes, back.amplitudes)) ** 2)
