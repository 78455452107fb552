"""Error and observed order under mesh refinement.

Runs the linear dispersive problem on [0, 4 pi] and the manufactured Burgers
problem on [0, 1] for a few meshes and prints the usual table.

    python3 demos/convergence_study.py
"""

from kdvdg import linear_problem, nonlinear_problem
from kdvdg.experiments import run_convergence


def table(problem, k, Ns, T):
    rows = run_convergence(problem, k, Ns, T)
    print(f"\n{problem.name} (eps={problem.eps:g}), k={k}, T={T}")
    print("   N     u error  order     q error  order")
    for r in rows:
        print(f"{r.N:4d}  {r.errors['u']:.3e}  {r.orders['u']:5.2f}"
              f"  {r.errors['q']:.3e}  {r.orders['q']:5.2f}")


if __name__ == "__main__":
    table(linear_problem(), 2, [8, 16, 32, 64], 0.1)
    for eps in (1.0, 0.1, 0.01):
        table(nonlinear_problem(eps), 2, [16, 32, 64], 0.1)
