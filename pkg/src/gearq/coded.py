"""MDS-coded frame ARQ: exact stage kernel and matching simulator rules.

A frame is M coded packets; any N distinct packets decode it.  Feedback
is a cumulative degrees-of-freedom count, delivered each slot over the
reverse chain.  Protocol semantics (shared by the analytic kernel and
the simulator, which is normative):

* the M packets go out back to back; the frame-level feedback arrives
  one RTT after the last of them;
* while nothing has been acknowledged the whole frame is retransmitted
  (on a delivered all-zero feedback, or when the frame timer runs out);
  once m >= 1 degrees of freedom are acknowledged, repairs are single
  fresh coded packets;
* a delivered feedback acknowledges every degree of freedom it reports
  (multi-ack); if it reports progress the sender drops any not yet sent
  repair packets and schedules the next repair one RTT later; a
  no-progress feedback on a round's own feedback slot triggers the next
  round immediately;
* timers run from a round's first transmission slot and are reset by
  every (re)scheduling; receptions beyond N are discarded.

The analytic kernel runs on the product space (chain state, u) where
u = received-but-unacknowledged degrees of freedom, so round outcomes,
multi-acks and repair pipelining are carried exactly; stage n (the n-th
acknowledgment) advances by consuming one unit of u.  Transmission-time
MGFs attach z to every transmitted packet; delay MGFs attach z to every
slot.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import CompositeChannel, ParameterError
from .genfunc import (
    DualMatrix,
    dual_add,
    dual_geo,
    dual_identity,
    dual_mul,
    dual_sum_truncated,
    dual_term,
)
from .protocols import Metrics, ProtocolParams, _metrics_from_mgfs


def _shift_up(size: int, cap: int) -> np.ndarray:
    """Saturating u+1 operator: increments beyond cap are discarded."""
    U = np.zeros((size, size))
    for u in range(size):
        U[u, u + 1 if u < cap else u] = 1.0
    return U


def _shift_down(size: int) -> np.ndarray:
    """u-1 operator used when an acknowledgment consumes one DoF."""
    D = np.zeros((size, size))
    D[0, 0] = 1.0
    for u in range(1, size):
        D[u, u - 1] = 1.0
    return D


@dataclass(frozen=True)
class CodedKernel:
    """Stage matrices of the coded scheme on the (chain, u) product space.

    For stage n (1-based), cap_n = N - n + 1 receptions remain useful.
    K steps transmit one packet (u may rise), W steps only observe
    feedback.  The classified observation matrices P_C(n, x, y) split a
    stage's decisive step by forward outcome x (0: the needed DoF is
    available afterwards, i.e. u >= 1) and reverse outcome y; their sum
    over xy is row stochastic.
    """

    ch: CompositeChannel
    N: int
    dim: int
    plain: np.ndarray
    W0: np.ndarray
    W1: np.ndarray
    K: tuple[np.ndarray, ...]
    K0: tuple[np.ndarray, ...]
    K1: tuple[np.ndarray, ...]
    proj_up: np.ndarray
    proj_zero: np.ndarray
    advance: np.ndarray

    def P_A(self, n: int) -> np.ndarray:
        """Stage-advance gain: identity at 0, one u-consumption after that."""
        return np.eye(self.dim) if n == 0 else self.advance

    def P_C(self, n: int, x: int, y: int) -> np.ndarray:
        Ky = (self.K0, self.K1)[y][n - 1]
        proj = self.proj_up if x == 0 else self.proj_zero
        return Ky @ proj

    def start_vector(self) -> np.ndarray:
        e0 = np.zeros(self.dim // 4)
        e0[0] = 1.0
        return np.kron(e0, self.ch.pi_I)


def default_coded_kernel(ch: CompositeChannel, p: ProtocolParams) -> CodedKernel:
    """Exact kernel for the protocol semantics above."""
    N = p.N
    size = N + 1
    F0 = np.kron(ch.fwd.P0, ch.rev.P)
    F1 = np.kron(ch.fwd.P1, ch.rev.P)
    F00 = np.kron(ch.fwd.P0, ch.rev.P0)
    F01 = np.kron(ch.fwd.P0, ch.rev.P1)
    F10 = np.kron(ch.fwd.P1, ch.rev.P0)
    F11 = np.kron(ch.fwd.P1, ch.rev.P1)
    I_u = np.eye(size)
    K, K0, K1 = [], [], []
    for n in range(1, N + 1):
        up = _shift_up(size, N - n + 1)
        K.append(np.kron(up, F0) + np.kron(I_u, F1))
        K0.append(np.kron(up, F00) + np.kron(I_u, F10))
        K1.append(np.kron(up, F01) + np.kron(I_u, F11))
    u_pos = np.zeros((size, size))
    u_pos[1:, 1:] = np.eye(size - 1)
    u_zero = np.zeros((size, size))
    u_zero[0, 0] = 1.0
    return CodedKernel(
        ch=ch,
        N=N,
        dim=4 * size,
        plain=np.kron(I_u, ch.Pc),
        W0=np.kron(I_u, ch.Px0),
        W1=np.kron(I_u, ch.Px1),
        K=tuple(K),
        K0=tuple(K0),
        K1=tuple(K1),
        proj_up=np.kron(u_pos, np.eye(4)),
        proj_zero=np.kron(u_zero, np.eye(4)),
        advance=np.kron(_shift_down(size), np.eye(4)),
    )


def _in_flight(offset: int, k: int, T: int, round_len: int) -> int:
    """Packets scheduled within the RTT after an acknowledgment at `offset`.

    A feedback acting at shifted offset o is received k slots after its
    pairing slot, so repair packets with slots in (o, o+k) have already
    been committed when the sender learns of the acknowledgment.  They
    are charged to the transmission count; their payload is superseded.
    """
    return sum(
        1 for o2 in range(offset + 1, offset + k) if (o2 - 1) % T >= T - round_len
    )


def _recovery_walk(
    kern: CodedKernel,
    stage: int,
    round_len: int,
    k: int,
    T: int,
    kind: str,
    z: float,
    tol: float,
) -> DualMatrix:
    """Wait for a delivered feedback after stage `stage`'s DoF arrived unacked.

    Repair rounds of round_len packets are inserted every T slots (the
    timer runs from the previous round's first slot); the sender acts on
    feedback only between rounds and at a round's final slot, so
    mid-round offsets are forward-only steps.  Any acted-on delivered
    feedback ends the walk with the acknowledgment, plus the
    transmission charge for repairs already in flight.
    """
    slot = kind == "delay"
    K0 = kern.K0[stage - 1]
    K1 = kern.K1[stage - 1]
    Km = kern.K[stage - 1]

    def steps():
        prefix = dual_identity(kern.dim)
        o = 1
        while True:
            pos = (o - 1) % T - (T - round_len)
            if 0 <= pos < round_len - 1:
                # mid-round packet slot: transmit, feedback not acted on
                prefix = dual_mul(prefix, dual_term(Km, 1, z))
            else:
                boundary = pos == round_len - 1
                x0, x1 = (K0, K1) if boundary else (kern.W0, kern.W1)
                z_step = 1 if (slot or boundary) else 0
                z_exit = z_step + (_in_flight(o, k, T, round_len) if kind == "tau" else 0)
                yield dual_mul(prefix, dual_term(x0, z_exit, z))
                prefix = dual_mul(prefix, dual_term(x1, z_step, z))
            o += 1

    return dual_sum_truncated(steps(), tol=tol)


def build_coded_mgf(
    ch: CompositeChannel,
    p: ProtocolParams,
    kernel: CodedKernel | None = None,
    kind: str = "tau",
    z: float = 1.0,
) -> DualMatrix:
    """Matrix MGF of the coded frame (kind 'tau': packets, 'delay': slots)."""
    if kind not in ("tau", "delay"):
        raise ValueError("kind must be 'tau' or 'delay'")
    kern = default_coded_kernel(ch, p) if kernel is None else kernel
    k, T, M, N = p.k, p.T, p.M, p.N
    slot = kind == "delay"
    tol = p.series_tol
    sw = p.switches

    def plain(j: int) -> DualMatrix:
        return dual_term(np.linalg.matrix_power(kern.plain, j), j if slot else 0, z)

    def kpow(n: int, j: int) -> DualMatrix:
        return dual_term(np.linalg.matrix_power(kern.K[n - 1], j), j, z)

    # initial round: k-1 plain slots to line up the first feedback, then
    # M-1 packet slots; the M-th packet shares the decisive step below.
    if slot and sw.coded_delay_prefix == "displayed":
        prefix = dual_term(np.linalg.matrix_power(kern.plain, k), k, z)
        prefix = dual_mul(prefix, kpow(1, M - 1))
    else:
        prefix = dual_mul(plain(k - 1), kpow(1, M - 1))

    # frame retransmission loop while nothing is acknowledged
    obs0 = {(x, y): kern.P_C(1, x, y) for x in (0, 1) for y in (0, 1)}
    Pk1 = np.linalg.matrix_power(kern.plain, k - 1)
    PTM = np.linalg.matrix_power(kern.plain, T - M)
    KM1 = np.linalg.matrix_power(kern.K[0], M - 1)
    if sw.coded_am_loop == "displayed":
        nack_gap, tout_gap, nack_z, tout_z = k, T + 1, k + M, T + 1
        nack_mat = obs0[(1, 0)] @ np.linalg.matrix_power(kern.plain, nack_gap - 1) @ KM1
        tout_mat = obs0[(1, 1)] @ np.linalg.matrix_power(kern.plain, tout_gap - M) @ KM1
        loop = dual_add(
            dual_term(nack_mat, nack_z if slot else M, z),
            dual_term(tout_mat, tout_z if slot else M, z),
        )
    else:
        loop = dual_add(
            dual_term(obs0[(1, 0)] @ Pk1 @ KM1, (k + M - 1) if slot else M, z),
            dual_term(obs0[(1, 1)] @ PTM @ KM1, T if slot else M, z),
        )
    ack0_z = 1 + (_in_flight(0, k, T, M) if kind == "tau" else 0)
    stage1 = dual_mul(dual_geo(loop), dual_add(
        dual_term(obs0[(0, 0)], ack0_z, z),
        dual_mul(
            dual_term(obs0[(0, 1)], 1, z),
            _recovery_walk(kern, 1, M, k, T, kind, z, tol),
        ),
    ))
    phi = dual_mul(prefix, stage1)

    for n in range(2, N + 1):
        entry = dual_term(kern.P_A(n - 1), 0, z)
        obs = {(x, y): kern.P_C(n, x, y) for x in (0, 1) for y in (0, 1)}
        rep_loop = dual_add(
            dual_term(obs[(1, 0)] @ Pk1, k if slot else 1, z),
            dual_term(
                obs[(1, 1)] @ np.linalg.matrix_power(kern.plain, T - 1),
                T if slot else 1,
                z,
            ),
        )
        exits = dual_add(
            dual_term(obs[(0, 0)], 1, z),
            dual_mul(
                dual_term(obs[(0, 1)], 1, z),
                _recovery_walk(kern, n, 1, k, T, kind, z, tol),
            ),
        )
        repair = dual_mul(
            dual_term(kern.proj_zero @ Pk1, (k - 1) if slot else 0, z),
            dual_mul(dual_geo(rep_loop), exits),
        )
        factor = dual_mul(entry, dual_add(dual_term(kern.proj_up, 0, z), repair))
        if slot and sw.coded_stage_z:
            factor = dual_mul(factor, dual_term(np.eye(kern.dim), n - 1, z))
        phi = dual_mul(phi, factor)
    return phi


def coded_metrics(
    ch: CompositeChannel, p: ProtocolParams, kernel: CodedKernel | None = None
) -> Metrics:
    """Frame-level and per-packet throughput/delay for the coded scheme."""
    if p.scheme != "coded":
        raise ParameterError("params do not select the coded scheme")
    kern = default_coded_kernel(ch, p) if kernel is None else kernel
    tau = build_coded_mgf(ch, p, kern, "tau")
    delay = build_coded_mgf(ch, p, kern, "delay")
    return _metrics_from_mgfs(ch, p.M, tau, delay, pi_I=kern.start_vector())


# ---------------------------------------------------------------------------
# slot-level simulation (normative semantics)
# ---------------------------------------------------------------------------

_FAR = np.iinfo(np.int64).max // 4


def simulate_coded(cfg, ch: CompositeChannel):
    """Vectorized episodic simulation of the coded frame protocol.

    Each lane runs one frame at a time over the joint chain, using the
    per-tick event order: scheduled round start / timer expiry, packet
    transmission (forward draw, DoF counting), feedback processing
    (reverse draw, multi-ack, repair scheduling).  Returns SimStats with
    frame-level tau and delay samples.
    """
    from .sim import SimStats, _Moments, _chain_step, _draw_states

    p = cfg.params
    k, T, M, N = p.k, p.T, p.M, p.N
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    cumP = np.cumsum(ch.Pc, axis=1)
    eps_f = np.array([ch.fwd.eps_G, ch.fwd.eps_B])
    eps_r = np.array([ch.rev.eps_G, ch.rev.eps_B])
    init_dist = ch.pi_I if cfg.init_mode == "model" else ch.pi_c

    B = min(cfg.batch, cfg.horizon)
    quota = np.full(B, cfg.horizon // B, dtype=np.int64)
    quota[: cfg.horizon % B] += 1

    def fresh(mask):
        n_new = int(mask.sum())
        if n_new:
            state[mask] = _draw_states(rng, init_dist, n_new)
            s[mask] = 0
            tau[mask] = 0
            c_rx[mask] = 0
            c_ack[mask] = 0
            cnt_rem[mask] = 0
            sched_start[mask] = k
            sched_len[mask] = M
            own_obs[mask] = _FAR
            next_expiry[mask] = k + T

    state = np.zeros(B, dtype=np.int64)
    s = np.zeros(B, dtype=np.int64)
    tau = np.zeros(B, dtype=np.int64)
    c_rx = np.zeros(B, dtype=np.int64)
    c_ack = np.zeros(B, dtype=np.int64)
    cnt_rem = np.zeros(B, dtype=np.int64)
    sched_start = np.zeros(B, dtype=np.int64)
    sched_len = np.zeros(B, dtype=np.int64)
    own_obs = np.zeros(B, dtype=np.int64)
    next_expiry = np.zeros(B, dtype=np.int64)
    active = quota > 0
    fresh(active)
    acc = _Moments()

    while active.any():
        u_step, u_f, u_r = rng.random((3, B))
        state[active] = _chain_step(cumP, state[active], u_step[active])
        s[active] += 1

        mat = active & (s == sched_start)
        cnt_rem[mat] = sched_len[mat]
        own_obs[mat] = s[mat] + sched_len[mat] - 1
        sched_start[mat] = _FAR

        exp = active & (s == next_expiry)
        if exp.any():
            length = np.where(c_ack == 0, M, 1)
            cnt_rem[exp] = length[exp]
            own_obs[exp] = s[exp] + length[exp] - 1
            next_expiry[exp] = s[exp] + T

        cnt = active & (cnt_rem > 0)
        tau[cnt] += 1
        land = cnt & ~(u_f < eps_f[state // 2]) & (c_rx < N)
        c_rx[land] += 1
        cnt_rem[cnt] -= 1

        # feedback is acted on only between rounds / at a round's last slot
        fb = active & ~(u_r < eps_r[state % 2]) & (cnt_rem == 0)
        prog = fb & (c_rx > c_ack)
        if prog.any():
            # charge repair packets already committed within one RTT
            pend = prog & (next_expiry > s) & (next_expiry < s + k)
            length = np.where(c_ack == 0, M, 1)
            tau[pend] += np.minimum(s[pend] + k - next_expiry[pend], length[pend])
        c_ack[prog] = c_rx[prog]
        done = prog & (c_ack == N)
        part = prog & ~done
        if part.any():
            cnt_rem[part] = 0
            sched_start[part] = s[part] + k
            sched_len[part] = 1
            own_obs[part] = _FAR
            next_expiry[part] = s[part] + k + T
        nack = fb & ~prog & (s == own_obs)
        if nack.any():
            length = np.where(c_ack == 0, M, 1)
            sched_start[nack] = s[nack] + k
            sched_len[nack] = length[nack]
            own_obs[nack] = _FAR
            next_expiry[nack] = s[nack] + k + T

        if done.any():
            acc.add(tau[done], s[done])
            quota[done] -= 1
            more = done & (quota > 0)
            active &= ~done | more
            fresh(more)
    return acc.stats()
