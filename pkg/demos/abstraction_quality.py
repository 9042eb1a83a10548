"""
How good is parity as a stand-in for primality?
===============================================

Abstract test matrices for the parity and primality abstractions over
growing value ranges, then a look at the abstract operators of one program.
"""

import numpy as np

from pdfa import pai

# Diagonal entries: chance that a member of each class passes the test.
rows = {n: pai.quality_table(n) for n in (10, 100, 1000, 10000)}
print(pai.format_quality_table(rows))

# The pseudo-inverse of a classification matrix averages over each class.
a = pai.parity(range(6))
print("A =\n", a.a)
print("A+ =\n", a.a_dagger)
print("A+ A = I:", np.allclose(a.a_dagger @ a.a, np.eye(2)))

# Lifting a distribution sums the mass in each class.
rho = np.array([0.1, 0.1, 0.3, 0.2, 0.2, 0.1])
print("lifted:", pai.lift_distribution(rho, a))
