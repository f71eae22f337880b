"""End-to-end helpers: trace -> flows -> frequency features -> model -> verdicts.

The streaming runner connects ingest, extraction and scoring with bounded
queues on worker threads; results are always returned in flow-key order.
"""
from __future__ import annotations

import queue
import threading
from collections.abc import Iterable, Sequence
from typing import Optional

import numpy as np

from . import cluster, fsc
from .cluster import ClusterModel, DetectionResult
from .config import HyperParams
from .encoding import SelectionProblem, SelectionResult, select_encoding
from .errors import EmptyFlow
from .ingest import Flow, FlowTable, KeyMode, PacketRecord, group_flows, to_feature_rows
from .spectral import BLOCK_FRAMES, FrequencyFeatures, extract

TRAINING_FRACTION = 0.2
FEATURES = ("proto", "iat", "length")


def feature_columns(features) -> list[int]:
    """Column indices of named per-packet features; None selects all three."""
    if features is None:
        return [0, 1, 2]
    cols = []
    for name in features:
        if name not in FEATURES:
            raise ValueError(f"unknown feature {name!r}; choose from {', '.join(FEATURES)}")
        cols.append(FEATURES.index(name))
    if not cols or len(set(cols)) != len(cols):
        raise ValueError("features must be a non-empty list without repeats")
    return cols


class EmptyTrace(EmptyFlow):
    pass


def training_prefix(records: Sequence[PacketRecord], fraction: float = TRAINING_FRACTION):
    """First ``fraction`` of the packets (at least one) in trace order."""
    if len(records) == 0:
        raise EmptyTrace("empty training trace")
    return list(records[:max(1, int(len(records) * fraction))])


def selection_features(records: Sequence[PacketRecord], key_mode=KeyMode.SOURCE_IP,
                       features=None) -> np.ndarray:
    """Per-packet features of a record list, computed within each flow and stacked."""
    flows = group_flows(records, key_mode)
    return np.vstack([to_feature_rows(f) for f in flows])[:, feature_columns(features)]


def select_params(records: Sequence[PacketRecord], hp: HyperParams = HyperParams(),
                  quantile: Optional[float] = None, search_budget: int = 6000, seed: int = 0,
                  key_mode=KeyMode.SOURCE_IP, features=None) -> SelectionResult:
    S = selection_features(training_prefix(records), key_mode, features)
    problem = SelectionProblem.from_features(S, w_min=hp.w_min, w_max=hp.w_max,
                                             budget=hp.budget, quantile=quantile)
    return select_encoding(problem, search_budget=search_budget, seed=seed)


def flow_features(flow: Flow, w, hp: HyperParams = HyperParams(),
                  features=None) -> FrequencyFeatures:
    """Frequency features of one flow, built a block of frames at a time.

    Same values as ``extract(to_feature_rows(flow), w, hp)`` without
    materializing the whole per-packet matrix of a long flow.
    """
    cols = feature_columns(features)
    n_whole = len(flow) // hp.w_seg * hp.w_seg
    if n_whole == 0:
        return extract(to_feature_rows(flow)[:, cols], w, hp)
    out = np.empty((hp.k_f, n_whole // hp.w_seg))
    step = BLOCK_FRAMES * hp.w_seg
    for i in range(0, n_whole, step):
        j = min(i + step, n_whole)
        S = to_feature_rows(flow.slice(i, j))
        if i:
            S[0, 1] = flow.timestamp_us[i] - flow.timestamp_us[i - 1]
        out[:, i // hp.w_seg:j // hp.w_seg] = extract(S[:, cols], w, hp).R
    return FrequencyFeatures(out, hp.w_seg, hp.c)


def model_features(model: ClusterModel, flow: Flow) -> FrequencyFeatures:
    return flow_features(flow, model.encoding, model.hp, model.features)


def flow_samples(flows: Iterable[Flow], w, hp: HyperParams = HyperParams(),
                 features=None) -> np.ndarray:
    """Window samples of every flow, stacked in iteration order."""
    parts = [cluster.window_samples(flow_features(f, w, hp, features), hp.w_win)
             for f in flows if len(f)]
    if not parts:
        return np.zeros((0, hp.k_f))
    return np.vstack(parts)


def train_spectral(flows: Iterable[Flow], w, hp: HyperParams = HyperParams(),
                   seed: int = 0, features=None) -> ClusterModel:
    X = flow_samples(flows, w, hp, features)
    model = cluster.train(X, hp.k_c, seed=seed, hp=hp, encoding=w)
    if features is not None:
        model.features = list(features)
    return model


def detect_flows(model: ClusterModel, flows: Iterable[Flow], phi: float) -> list[DetectionResult]:
    out = [cluster.detect(model, model_features(model, f), phi, f.key) for f in flows if len(f)]
    out.sort(key=lambda r: r.flow_key.sort_key())
    return out


def spectral_scores(model: ClusterModel, flows: Sequence[Flow]) -> np.ndarray:
    """Per-flow maximum window loss, in the order of ``flows``; 0 for flows without a frame."""
    return np.array([cluster.detect(model, model_features(model, f), 1.0).max_loss
                     for f in flows])


def fsc_vectors(flows: Iterable[Flow]) -> np.ndarray:
    return np.array([fsc.flow_stats_for(f) for f in flows])


def train_fsc(flows: Iterable[Flow], hp: HyperParams = HyperParams(), seed: int = 0) -> ClusterModel:
    scaled, scaler = fsc.normalize_stats(fsc_vectors(flows))
    model = cluster.train(scaled, hp.k_c, seed=seed, hp=hp)
    model.kind = "fsc"
    model.scaler = scaler.to_dict()
    return model


def fsc_scores(model: ClusterModel, flows: Sequence[Flow]) -> np.ndarray:
    """Nearest-center distance of each flow's scaled statistics vector."""
    if model.kind != "fsc" or model.scaler is None:
        raise ValueError("not a flow-statistics model")
    scaler = fsc.MinMaxScaler.from_dict(model.scaler)
    X = scaler.transform(fsc_vectors(flows))
    return cluster.nearest_distances(X, model.centers)


def fsc_detect(model: ClusterModel, flows: Sequence[Flow], phi: float) -> list[DetectionResult]:
    thr = model.threshold(phi)
    out = []
    for f, s in zip(flows, fsc_scores(model, flows)):
        verdict = cluster.Verdict.MALICIOUS if s >= thr else cluster.Verdict.BENIGN
        out.append(DetectionResult(f.key, np.array([s]), verdict, thr))
    out.sort(key=lambda r: r.flow_key.sort_key())
    return out


_DONE = object()


def _stage(fn, inq: queue.Queue, outq: queue.Queue, errors: list):
    failed = False
    while True:
        item = inq.get()
        if item is _DONE:
            outq.put(_DONE)
            return
        if failed:
            continue  # keep draining so upstream never blocks
        try:
            outq.put(fn(item))
        except Exception as e:  # surfaced to the caller after shutdown
            errors.append(e)
            failed = True


def stream_detect(model: ClusterModel, records: Iterable[PacketRecord], phi: float,
                  key_mode=KeyMode.SOURCE_IP, watermark: Optional[int] = None,
                  maxsize: int = 8) -> list[DetectionResult]:
    """Detect with ingest, extraction and scoring on separate threads.

    Flows are handed downstream when the table evicts them (``watermark``)
    or at end of input.  Queues hold at most ``maxsize`` items, so a slow
    scorer applies back-pressure to ingest.
    """
    flows_q: queue.Queue = queue.Queue(maxsize)
    feats_q: queue.Queue = queue.Queue(maxsize)
    results_q: queue.Queue = queue.Queue()
    errors: list = []

    def extract_one(flow):
        return flow.key, model_features(model, flow)

    def score_one(item):
        key, feats = item
        return cluster.detect(model, feats, phi, key)

    workers = [threading.Thread(target=_stage, args=(extract_one, flows_q, feats_q, errors), daemon=True),
               threading.Thread(target=_stage, args=(score_one, feats_q, results_q, errors), daemon=True)]
    for t in workers:
        t.start()
    table = FlowTable(key_mode, watermark)
    try:
        for rec in records:
            for flow in table.add(rec):
                if errors:
                    break
                flows_q.put(flow)
        for key in table.keys():
            flows_q.put(table.pop(key))
    finally:
        flows_q.put(_DONE)
        results = []
        while True:
            item = results_q.get()
            if item is _DONE:
                break
            results.append(item)
        for t in workers:
            t.join()
    if errors:
        raise errors[0]
    # flows evicted under a watermark can reappear as later segments of the same key
    results.sort(key=lambda r: r.flow_key.sort_key())
    return results
