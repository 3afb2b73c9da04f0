"""Accuracy barrier: distance of FIRENET outputs to the true solution set.

For each K the inputs are known to within 2**-n, yet the distance stays
between 10**-K and 10**(1-K) however large n is.

    python3 demos/barrier.py
"""
from firenet.barriers import TABLE_REFERENCE, breakdown_table

rows = breakdown_table((1, 3, 6), (10, 20, 30))
print(f"{'K':>2} {'n':>3} {'dist':>11} {'interval':>22} {'ok':>3}")
for row in rows:
    print(f"{row.K:2d} {row.n:3d} {row.dist:11.7f} ({row.lower_bound:.0e}, {row.upper_bound:.0e}] "
          f"{'yes' if row.passed else 'no':>3}")
print("published values for comparison:", TABLE_REFERENCE)
