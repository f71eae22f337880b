"""Write a synthetic trace as pcap, read it back, and group it into flows."""
import io

from freqdetect import ingest, synth

flows = synth.benign_population(3, seed=2, duration_s=1) + \
    synth.attack_population(synth.Kind.CONSTANT_SCAN, 1, seed=3)
records = synth.merge_flows(flows)
data = ingest.write_pcap(records)
print(f"{len(records)} packets -> {len(data)} bytes of pcap")

back = ingest.parse_pcap(data)
for f in ingest.group_flows(back, ingest.KeyMode.SOURCE_IP).flows():
    print(f"  {str(f.key):15s} {len(f):5d} packets, {f.byte_count:8d} bytes, {f.duration_us / 1e6:.2f} s")

buf = io.StringIO()
ingest.write_csv(records, buf)
print(f"same trace as CSV: {len(buf.getvalue().splitlines()) - 1} rows, labels kept: "
      f"{sum(r.label for r in ingest.parse_csv(buf.getvalue()))} malicious packets")
