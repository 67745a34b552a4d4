"""Peak negativity of a squeezed Kerr oscillator with thermal damping.

Run with ``python demos/damping_peak.py`` (about half a minute per row).
For each damping ratio Gamma_d / (g s^2) the master equation is integrated
at s = 6 and the peak of N(t) located by coarse scan plus refinement; the
large-squeezing solution gives the comparison column.
"""

from squeezekerr.asymptotic import asymptotic_max_negativity
from squeezekerr.dynamics import SimulationParams
from squeezekerr.errors import WindowExhausted
from squeezekerr.fock import SqueezeSpec, make_squeezed_vacuum
from squeezekerr.wigner import PhaseSpaceGrid, max_negativity

s = 6.0
n_max = 400
rho0 = make_squeezed_vacuum(SqueezeSpec(s), n_max)
grid = PhaseSpaceGrid(10.0, 1 / 40)

print(f"{'Gd/(g s^2)':>10} {'max N':>10} {'tau*':>7} {'asym max N':>11} {'tau*':>7}")
for ratio in (0.25, 0.5, 1.0):
    params = SimulationParams.from_ratios(s, gd_over_gs2=ratio, n_th=1000.0, n_max=n_max)
    try:
        res = max_negativity(rho0, params, grid, t_max=4.0 / s**4)
    except WindowExhausted as exc:
        print(f"{ratio:10.2f}  still rising at the end of the window (N = {exc.n_last:.5f})")
        continue
    asym = asymptotic_max_negativity(ratio)
    print(f"{ratio:10.2f} {res.n_star:10.5f} {res.t_star * s**4:7.3f} "
          f"{asym.n_star:11.5f} {asym.t_star:7.3f}")

# Every refinement stage is kept, which is what the convergence figure plots.
print("refinement stages of the last search:", [len(st.times) for st in res.trace])
