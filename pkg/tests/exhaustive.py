"""Exact protocol expectations by state enumeration.

Walks every protocol path over the joint chain with exact probabilities,
merging states and carrying (weight, weight*tau) aggregates, until the
surviving mass drops below tolerance.  Implements the same per-slot
event order as the simulator; serves as an independent oracle for both
the analytic kernels and the Monte Carlo path.
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np

FAR = 10**9


def enumerate_arq(ch, p, recovery_rate, tol: float = 1e-11, max_slots: int = 4000):
    """(absorbed_mass, E[tau], E[delay]) for the single-packet schemes.

    `recovery_rate(ri, rev_state)` gives the erasure probability of the
    ri-th cumulative feedback after a lost acknowledgment (the combining
    index rides in the enumeration state).
    """
    k, T, d = p.k, p.T, p.d
    Pc = ch.Pc
    eps_f = np.array([ch.fwd.eps_G, ch.fwd.eps_B])
    eps_r = np.array([ch.rev.eps_G, ch.rev.eps_B])
    pi0 = ch.pi_I / ch.pi_I.sum()

    WAIT, RECOV = 0, 1
    # state: (chain, mode, cd, ecd, ri); cd slots to the own observation
    states = defaultdict(lambda: [0.0, 0.0])
    for c in range(4):
        if pi0[c] > 0:
            states[(c, WAIT, k, 0, 0)][0] += pi0[c]
    e_tau = 0.0
    e_delay = 0.0
    absorbed = 0.0

    for t in range(1, max_slots + 1):
        nxt = defaultdict(lambda: [0.0, 0.0])
        for (c, mode, cd, ecd, ri), (w, wt) in states.items():
            for c2 in range(4):
                p_chain = Pc[c, c2]
                if p_chain == 0.0:
                    continue
                if mode == WAIT and cd > 1:
                    cell = nxt[(c2, WAIT, cd - 1, 0, 0)]
                    cell[0] += w * p_chain
                    cell[1] += wt * p_chain
                    continue
                if mode == WAIT:                      # own observation slot
                    ef = eps_f[c2 // 2]
                    er = eps_r[c2 % 2]
                    for p_f, fwd_ok in ((1.0 - ef, True), (ef, False)):
                        for p_r, rev_ok in ((1.0 - er, True), (er, False)):
                            pr = p_chain * p_f * p_r
                            if pr == 0.0:
                                continue
                            w2, wt2 = w * pr, wt * pr
                            if fwd_ok and rev_ok:
                                absorbed += w2
                                e_tau += wt2
                                e_delay += w2 * t
                            elif fwd_ok:
                                if d > 0:
                                    nxt[(c2, RECOV, 0, d, 0)][0] += w2
                                    nxt[(c2, RECOV, 0, d, 0)][1] += wt2
                                else:
                                    cell = nxt[(c2, RECOV, 0, T, 0)]
                                    cell[0] += w2
                                    cell[1] += wt2 + w2
                            elif rev_ok:
                                cell = nxt[(c2, WAIT, k, 0, 0)]
                                cell[0] += w2
                                cell[1] += wt2 + w2
                            else:
                                cell = nxt[(c2, WAIT, T, 0, 0)]
                                cell[0] += w2
                                cell[1] += wt2 + w2
                    continue
                # recovery slot: the ri-th cumulative feedback since the loss
                ri2 = ri + 1
                er = recovery_rate(ri2, c2 % 2)
                for p_r, rev_ok in ((1.0 - er, True), (er, False)):
                    pr = p_chain * p_r
                    if pr == 0.0:
                        continue
                    w2, wt2 = w * pr, wt * pr
                    if rev_ok:
                        absorbed += w2
                        e_tau += wt2
                        e_delay += w2 * t
                    elif ecd > 1:
                        cell = nxt[(c2, RECOV, 0, ecd - 1, ri2)]
                        cell[0] += w2
                        cell[1] += wt2
                    else:
                        cell = nxt[(c2, RECOV, 0, T, ri2)]
                        cell[0] += w2
                        cell[1] += wt2 + w2
        states = nxt
        if sum(v[0] for v in states.values()) < tol:
            break
    # the initial transmission itself
    return absorbed, e_tau + absorbed, e_delay


def enumerate_coded(ch, p, tol: float = 1e-11, max_slots: int = 2000):
    """Returns (absorbed_mass, E[tau], E[delay]) for the coded scheme."""
    k, T, M, N = p.k, p.T, p.M, p.N
    Pc = ch.Pc
    eps_f = np.array([ch.fwd.eps_G, ch.fwd.eps_B])
    eps_r = np.array([ch.rev.eps_G, ch.rev.eps_B])
    pi0 = ch.pi_I / ch.pi_I.sum()

    # state: (chain, c_rx, c_ack, cnt_rem, sched_in, sched_len, obs_in, exp_in)
    # counters are slots-until-event relative to the current slot, FAR if unset
    states = defaultdict(lambda: [0.0, 0.0])
    for c in range(4):
        if pi0[c] > 0:
            key = (c, 0, 0, 0, k, M, FAR, k + T)
            states[key][0] += pi0[c]
    e_tau = 0.0
    e_delay = 0.0
    absorbed = 0.0

    for t in range(1, max_slots + 1):
        nxt = defaultdict(lambda: [0.0, 0.0])
        for (c, c_rx, c_ack, cnt, sched, slen, obs, expiry), (w, wt) in states.items():
            for c2 in range(4):
                p_chain = Pc[c, c2]
                if p_chain == 0.0:
                    continue
                sched2 = sched - 1 if sched != FAR else FAR
                obs2 = obs - 1 if obs != FAR else FAR
                exp2 = expiry - 1 if expiry != FAR else FAR
                cnt2, slen2 = cnt, slen
                if sched2 == 0:
                    cnt2, obs2, sched2 = slen, slen - 1, FAR
                if exp2 == 0:
                    length = M if c_ack == 0 else 1
                    cnt2, obs2, exp2 = length, length - 1, T
                ef = eps_f[c2 // 2]
                er = eps_r[c2 % 2]
                fwd_opts = [(1.0, 0, 0)] if cnt2 == 0 else [
                    (1.0 - ef, 1, 1), (ef, 1, 0)
                ]
                for p_f, dtau, drx in fwd_opts:
                    if p_f == 0.0:
                        continue
                    rx = min(c_rx + drx, N)
                    rem = cnt2 - 1 if cnt2 > 0 else 0
                    for p_r, delivered in ((1.0 - er, True), (er, False)):
                        if p_r == 0.0:
                            continue
                        pr = p_chain * p_f * p_r
                        w2 = w * pr
                        wt2 = (wt + w * dtau) * pr
                        ack, cnt3, sched3, slen3, obs3, exp3 = (
                            c_ack, rem, sched2, slen2, obs2, exp2
                        )
                        extra = 0.0
                        if delivered and rem == 0:
                            if rx > c_ack:
                                # charge repairs already committed in the RTT
                                if exp3 != FAR and 0 < exp3 < k:
                                    extra = min(k - exp3, M if c_ack == 0 else 1)
                                if rx == N:
                                    absorbed += w2
                                    e_tau += wt2 + w2 * extra
                                    e_delay += w2 * t
                                    continue
                                ack = rx
                                cnt3, sched3, slen3 = 0, k, 1
                                obs3, exp3 = FAR, k + T
                            elif obs3 == 0:
                                sched3, slen3 = k, M if c_ack == 0 else 1
                                obs3, exp3 = FAR, k + T
                        if obs3 == 0:
                            obs3 = FAR
                        key = (c2, rx, ack, cnt3, sched3, slen3, obs3, exp3)
                        cell = nxt[key]
                        cell[0] += w2
                        cell[1] += wt2 + w2 * extra
        states = nxt
        if sum(v[0] for v in states.values()) < tol:
            break
    return absorbed, e_tau, e_delay
