"""Frequency-domain detection of malicious network traffic.

Per-packet features are linearly encoded, framed, Fourier transformed and
log-scaled into compact frequency features; a K-Means model of benign
features flags flows whose features sit far from every benign center.
"""
from .cluster import ClusterModel, DetectionResult, Verdict, detect, train, window_samples
from .config import HyperParams
from .encoding import SelectionProblem, SelectionResult, select_encoding
from .errors import DimensionMismatch, EmptyFlow, FreqDetectError
from .ingest import Flow, FlowKey, KeyMode, PacketRecord, group_flows, parse_csv, parse_pcap, read_trace
from .spectral import FrequencyFeatures, extract

__version__ = "0.1.0"
