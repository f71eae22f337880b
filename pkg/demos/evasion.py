"""Inject benign packets into attack flows at 1:1 .. 1:8 and watch both detectors."""
from freqdetect import experiments, synth

bench = experiments.build_bench(seed=0)
for kind in (synth.Kind.SYN_FLOOD, synth.Kind.LOW_RATE_BURST):
    res = experiments.evasion_sweep(bench, kind)
    print(kind.value)
    for r, row in res["auc"].items():
        label = "none" if r == 0 else f"1:{r}"
        print(f"  noise {label:4s}  spectral {row['spectral']:.3f}  fsc {row['fsc']:.3f}")
    print(f"  worst drop: spectral {res['drop']['spectral']:.3f}, fsc {res['drop']['fsc']:.3f}")
