"""Closed-form information loss of each extractor, checked by Monte-Carlo."""
from freqdetect import entropy

spec = entropy.GaussianProcessSpec.constant(50, 1.0)
print(f"raw sequence entropy, N=50, sigma=1: {entropy.packet_entropy(spec):.3f} nats")
for t in range(1, 7):
    r = entropy.verify_theorem(t, spec, mc_samples=100_000, w=10)
    mc = "" if r.monte_carlo is None else f", Monte-Carlo {r.monte_carlo:.3f} +- {r.mc_stderr:.3f}"
    print(f"{t}: {r.method.value:9s} closed form {r.closed_form:9.3f}{mc}  [{'ok' if r.passed else 'FAIL'}] {r.check}")

edge = entropy.GaussianProcessSpec.constant(2, 1 / entropy.K)
lo, up = entropy.loss_avg_bounds(edge)
print(f"N=2 at sigma=1/K: average loss {entropy.loss_avg_exact(edge):.3f}, stated bounds [{lo:.3f}, {up:.3f}]")
