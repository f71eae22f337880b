"""Pick the encoding vector from the first 20% of a benign trace."""
from freqdetect import HyperParams, pipeline, synth

records = synth.merge_flows(synth.benign_population(20, seed=0, duration_s=3))
hp = HyperParams()

hard = pipeline.select_params(records, hp, search_budget=2000)
print(f"every packet must satisfy the ordering: feasible={hard.feasible}, "
      f"least violating w={hard.w.round(2).tolist()}, "
      f"violated fraction {hard.violated_constraint_fraction:.4f}")

soft = pipeline.select_params(records, hp, quantile=0.95, search_budget=2000)
print(f"95% of packets: feasible={soft.feasible}, w={soft.w.round(2).tolist()}, "
      f"objective {soft.objective_value:.1f}")

one = pipeline.select_params(records, hp, features=["length"], search_budget=100)
print(f"length only: w={one.w.tolist()}, objective {one.objective_value}")
