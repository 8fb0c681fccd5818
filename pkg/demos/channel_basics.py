"""Tour of the Gilbert-Elliott channel objects.

Builds one link direction from (r, eps_G, eps_B, eps), shows how the
G->B rate q follows from the target error rate, then composes the joint
forward x reverse channel whose observation matrices drive everything
else in the package.
"""
import numpy as np

from gearq import build_composite, build_half_channel

np.set_printoptions(precision=4, suppress=True)

# A bursty link: always erases in the bad state, never in the good one.
# Asking for an aggregate error rate of 0.3 fixes q = r*eps/(1-eps).
half = build_half_channel(r=0.3, eps_G=0.0, eps_B=1.0, eps=0.3)
print("one direction: q =", round(half.q, 6))
print("state-transition matrix P:\n", half.P)
print("stationary vector pi:", half.pi)
print("success / error observation split (P0 + P1 = P):")
print(half.P0, "\n", half.P1)
print("aggregate error rate pi_G*eps_G + pi_B*eps_B =", half.pi @ [half.eps_G, half.eps_B])

# The joint channel pairs the forward bit of a slot with the reverse bit
# of its feedback one RTT later.  Kronecker products give the four
# observation matrices; 'xy' means forward bit x, reverse bit y.
ch = build_composite(half, half)
print("\ncomposite chain (4 states, forward major) row sums:", ch.Pc.sum(axis=1))
print("P00 (both delivered):\n", ch.P00)
print("stationary composite vector:", ch.pi_c)
print("new-packet vector pi_I = pi_c @ P0x (mass 1-eps):", ch.pi_I, "->", ch.pi_I.sum())
