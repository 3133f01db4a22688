"""The verification suite and a refinement study, as the CLI runs them."""
from macflow.harness import run_convergence, run_verify

result = run_verify(seed=42, sizes=(4, 8), dims=(2,))
print(result.to_csv())
print("all checks passed:", result.passed)

table = run_convergence("stokes-ms", "centred", levels=3, equations="stokes")
print(table.to_csv())
