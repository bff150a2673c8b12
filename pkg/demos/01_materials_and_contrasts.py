"""Material descriptions and contrast factorizations.

A scattering problem here is a background medium plus a compactly supported
perturbation of its coefficients. This demo builds isotropic and anisotropic
contrasts, then shows the sign-split factorization that the solver and the
imaging functionals share: the normalized contrast Q is written as
q_mat^T sigma2 q_mat with sigma2 carrying only the signs of its eigenvalues.
"""

import numpy as np

from tdscope import SymTensor3, aniso_contrast, factor_Q, iso_contrast

# An isotropic pair: background coefficient a, inclusion coefficient a_tilde.
c = iso_contrast(a=1.0, a_tilde=2.0)
print("isotropic contrast")
print("  a        =", c.a)
print("  a_tilde  =", c.a_tilde)
print("  beta     =", c.beta, "(a_tilde/a - 1)")
print("  q        =", c.q, "(beta/(beta + 2), the moderate-size knob)")

# Negative contrast, a softer inclusion. q flips sign with beta.
soft = iso_contrast(a=1.0, a_tilde=0.5)
print("softer inclusion: beta =", soft.beta, " q =", soft.q)

# A fully anisotropic inclusion over an isotropic background.
A = SymTensor3.identity()
A_tilde = SymTensor3.from_matrix(np.diag([2.0, 1.5, 0.6]))
ac = aniso_contrast(A, A_tilde)
print("\nanisotropic contrast")
print("  spectral radius of Q:", ac.spectral_radius)
print("  sigma2 diagonal (eigenvalue signs):", np.diag(ac.sigma2))

# The factorization behind every solve: Q = q_mat^T sigma2 q_mat.
q_mat, sigma2 = factor_Q(ac.Q)
recon_err = np.abs(q_mat.T @ sigma2 @ q_mat - ac.Q).max()
print("  reconstruction error:", recon_err)

# Mixed-sign contrast: one axis stiffer, one softer, one matched.
mixed = SymTensor3.from_matrix(np.diag([1.8, 0.4, 1.0]))
mc = aniso_contrast(A, mixed)
print("\nmixed-sign contrast sigma2 diagonal:", np.diag(mc.sigma2))
print("zero entries mark matched directions that drop out of the solve")
