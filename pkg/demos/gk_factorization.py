"""
Triangular factorization of near-identity matrices
==================================================

1 + Phi splits as (1 + K_plus)^{-1} D (1 + K_minus) with K_plus strictly
lower, K_minus strictly upper, and D diagonal.  The factors also solve a
layer-stripping equation, and partial products of the factorization nest:
the leading j x j block of the answer only ever sees the leading block
of the data.
"""

import numpy as np

from delsarte import (break_relation_defect, gk_factorize, glm_residual,
                      glm_solve, random_unit_minor)

# a worked 2 x 2 example, exact in integer arithmetic
Phi = np.array([[0.0, 1.0], [1.0, 1.0]])
pair = gk_factorize(Phi)
print("Phi =", Phi.tolist())
print("K_plus =", pair.K_plus.tolist())
print("K_minus =", pair.K_minus.tolist())
print("D =", pair.D.tolist())
print(f"reconstruction residual: {pair.residual:.1e}")

# the diagonal break relation: stripping K's diagonal is exact
print(f"break relation defect: "
      f"{break_relation_defect(pair.K_plus):.1e}")

# random battery: unit leading minors guarantee the factorization exists
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(50):
    P = random_unit_minor(40, rng)
    worst = max(worst, gk_factorize(P).residual)
print(f"worst residual over 50 random 40 x 40 draws: {worst:.2e}")

# the same factors solve the layer-stripping equation
P = random_unit_minor(30, rng)
K_plus, K_minus = glm_solve(P)
print(f"layer-stripping residual: {glm_residual(P, K_plus, K_minus):.2e}")
print(f"agreement with the direct factorization: "
      f"{np.abs(K_plus - gk_factorize(P).K_plus).max():.2e}")

# nesting: factor the leading 12 x 12 block, compare with the full answer
full = gk_factorize(P)
sub = gk_factorize(P[:12, :12])
print(f"leading-block nesting defect: "
      f"{np.abs(full.K_plus[:12, :12] - sub.K_plus).max():.2e}")

# a singular leading minor is detected, not silently inverted
bad = np.eye(6)
bad[1, 1] = 0.0
L = np.tril(0.3 * rng.standard_normal((6, 6)), -1) + np.eye(6)
U = np.triu(0.3 * rng.standard_normal((6, 6)), 1) + np.eye(6)
sing = L @ bad @ U - np.eye(6)
try:
    gk_factorize(sing)
    print("unexpected: singular minor accepted")
except Exception as exc:
    print(f"singular minor rejected: {type(exc).__name__}")
