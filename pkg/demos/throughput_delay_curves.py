"""Headline trend study: throughput and delay versus block-error rate.

Sweeps the block-error rate for the three retransmission schemes at
k = 5, r = 0.3, T = 10 (soft combining uses gamma/rho = 10*eps) and
prints the per-packet throughput and delay columns.  The coded frame
uses M = 5 packets with N = 4 needed to decode; its per-packet figures
divide the frame totals by M.
"""
from gearq import ProtocolParams, harq_metrics, symmetric_composite, uncoded_metrics
from gearq.coded import coded_metrics

K, T, M, N = 5, 10, 5, 4

print(f"k={K} T={T} r=0.3 coded frame M={M} N={N}  (all figures per packet)")
print()
print("eps    eta_unc  eta_harq eta_coded |  D_unc   D_harq  D_coded")
for i in range(1, 13):
    eps = round(0.05 * i, 2)
    ch = symmetric_composite(0.3, 0.0, 1.0, eps)
    unc = uncoded_metrics(ch, ProtocolParams(k=K, T=T))
    hrq = harq_metrics(
        ch, ProtocolParams(k=K, T=T, scheme="harq", gamma_over_rho=10 * eps)
    )
    cod = coded_metrics(ch, ProtocolParams(k=K, T=T, scheme="coded", M=M, N=N))
    print(
        f"{eps:4.2f}   {unc.throughput:.4f}  {hrq.throughput:.4f}   {cod.throughput:.4f}  "
        f"| {unc.delay_mean:6.3f}  {hrq.delay_mean:6.3f}  {cod.delay_mean_per_packet:6.3f}"
    )

print()
print("Reading the table: throughput falls with eps for every scheme, the")
print("coded frame decays slowest and keeps per-packet delay far below the")
print("single-packet schemes, while soft combining trims the uncoded delay")
print("at essentially the same throughput.")
