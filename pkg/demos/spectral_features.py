"""Turn one flow into its frequency-feature matrix and save a spectrogram."""
import sys

import numpy as np

from freqdetect import HyperParams, ingest, spectral, synth

out = sys.argv[1] if len(sys.argv) > 1 else "flow.ppm"
hp = HyperParams()
w = np.array([10.0, 10.0, 1000.0])  # proto, inter-arrival (us), length

for name, profile in [("benign", synth.benign(rate_pps=1000, duration_s=5)),
                      ("syn flood", synth.syn_flood(rate_pps=5000))]:
    flow = synth.generate(profile, seed=1)
    S = ingest.to_feature_rows(flow)
    feats = spectral.extract(S, w, hp)
    print(f"{name:9s}: {len(flow)} packets -> R {feats.k_f}x{feats.n_f}, "
          f"compression {spectral.compression_ratio(hp, len(flow), 3):.3f}, "
          f"mean R {feats.R.mean():.3f}, DC share {feats.R[0].mean() / feats.R.mean():.2f}")

# a flood repeats the same encoded value, so its energy sits in the DC row
spectral.spectrogram_export(feats.R, out)
print(f"spectrogram of the flood flow written to {out}")
