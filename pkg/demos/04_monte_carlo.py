"""
A small Monte-Carlo study
=========================

``run_mc`` repeats a test over independent draws from a design and reports
rejection rates. Each replication has its own seed, so results do not depend
on the number of workers.
"""
# %%
from spectest import DgpSpec, McConfig, run_mc, time_profile

mc = McConfig(R=100, B=199, tests=("nusvm", "ocsvm", "gp"), base_seed=7)
cells = [DgpSpec("1", q=10, n=400), DgpSpec("2", q=10, n=400)]
report = run_mc(mc, cells)

# %% Rates at 5% for each test
for test in mc.tests:
    print(test, [round(report.rate(test, c.id, 0.05), 2) for c in cells])

# %% Rows are ready for a CSV file
print(report.to_csv().splitlines()[:4])

# %% Bootstrap cost as n doubles: the SVM tests scale linearly
rows, exponents = time_profile(("ocsvm", "kcm"), n_grid=(200, 400, 800), reps=3, B=200)
for r in rows:
    print(r)
print({k: round(v, 2) for k, v in exponents.items()})
