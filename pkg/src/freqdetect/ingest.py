"""Packet ingestion: libpcap and CSV readers, flow grouping, per-packet features.

Only classic libpcap files with an Ethernet link layer are read; pcapng is
rejected as a malformed header.  CSV traces use the header
``flow_id,timestamp_us,length,proto_code`` with an optional trailing ``label``
column (0 benign, 1 malicious) carried by synthetic traces.
"""
from __future__ import annotations

import bisect
import csv
import dataclasses
import enum
import io
import ipaddress
import logging
import struct
import warnings
from collections.abc import Iterable, Iterator, Sequence
from typing import Optional, TextIO, Union

import numpy as np

from .errors import EmptyFlow, FreqDetectError

log = logging.getLogger(__name__)

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_SWAPPED = 0xD4C3B2A1
LINKTYPE_ETHERNET = 1
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16

ETH_IPV4 = 0x0800
ETH_IPV6 = 0x86DD
ETH_VLAN = (0x8100, 0x88A8)

CSV_HEADER = ["flow_id", "timestamp_us", "length", "proto_code"]
MAX_LENGTH = 65535


class PcapError(FreqDetectError):
    pass


class MalformedHeader(PcapError):
    pass


class TruncatedRecord(PcapError):
    """A capture record is shorter than its declared ``incl_len``.

    ``records`` holds everything parsed before the damaged record.
    """

    def __init__(self, message: str, records: list, offset: int):
        super().__init__(message)
        self.records = records
        self.offset = offset


class TruncatedRecordWarning(UserWarning):
    pass


class RowParseError(FreqDetectError, ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class KeyMode(str, enum.Enum):
    SOURCE_IP = "SourceIP"
    FIVE_TUPLE = "FiveTuple"


@dataclasses.dataclass(frozen=True)
class FlowKey:
    """Flow identity.

    In ``SourceIP`` mode only ``source_addr`` is set.  Keys read from CSV traces
    are opaque: ``source_addr`` holds the flow id and no 5-tuple fields exist,
    so projecting them to ``FiveTuple`` leaves them unchanged.
    """

    mode: KeyMode
    source_addr: str
    dest_addr: Optional[str] = None
    source_port: Optional[int] = None
    dest_port: Optional[int] = None
    proto: Optional[int] = None

    @property
    def has_five_tuple(self) -> bool:
        return self.dest_addr is not None

    def project(self, mode: KeyMode) -> "FlowKey":
        mode = KeyMode(mode)
        if mode is KeyMode.SOURCE_IP:
            if self.mode is KeyMode.SOURCE_IP and not self.has_five_tuple:
                return self
            return FlowKey(KeyMode.SOURCE_IP, self.source_addr)
        if not self.has_five_tuple:
            return self
        return dataclasses.replace(self, mode=KeyMode.FIVE_TUPLE)

    def __str__(self) -> str:
        if self.mode is KeyMode.SOURCE_IP or not self.has_five_tuple:
            return self.source_addr
        return (f"{self.source_addr}:{self.source_port}->"
                f"{self.dest_addr}:{self.dest_port}/{self.proto}")

    def sort_key(self):
        return (self.mode.value, self.source_addr, self.dest_addr or "",
                self.source_port or 0, self.dest_port or 0, self.proto or 0)


@dataclasses.dataclass(frozen=True)
class PacketRecord:
    timestamp_us: int
    length_bytes: int
    proto_code: int
    flow_key: FlowKey
    label: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.length_bytes <= MAX_LENGTH:
            raise ValueError(f"length_bytes out of range: {self.length_bytes}")
        if not 0 <= self.proto_code <= 255:
            raise ValueError(f"proto_code out of range: {self.proto_code}")


# ---------------------------------------------------------------------------
# libpcap

def _decode_frame(frame: bytes) -> tuple[int, FlowKey]:
    """Return (proto_code, 5-tuple key) for one Ethernet frame."""
    if len(frame) < 14:
        return 0, _mac_key(frame)
    ethertype = struct.unpack_from("!H", frame, 12)[0]
    off = 14
    while ethertype in ETH_VLAN and len(frame) >= off + 4:
        ethertype = struct.unpack_from("!H", frame, off + 2)[0]
        off += 4

    if ethertype == ETH_IPV4 and len(frame) >= off + 20:
        ihl = (frame[off] & 0x0F) * 4
        proto = frame[off + 9]
        src = str(ipaddress.IPv4Address(frame[off + 12:off + 16]))
        dst = str(ipaddress.IPv4Address(frame[off + 16:off + 20]))
        sport, dport = _ports(frame, off + max(ihl, 20), proto)
        return proto, FlowKey(KeyMode.FIVE_TUPLE, src, dst, sport, dport, proto)
    if ethertype == ETH_IPV6 and len(frame) >= off + 40:
        proto = frame[off + 6]
        src = str(ipaddress.IPv6Address(frame[off + 8:off + 24]))
        dst = str(ipaddress.IPv6Address(frame[off + 24:off + 40]))
        sport, dport = _ports(frame, off + 40, proto)
        return proto, FlowKey(KeyMode.FIVE_TUPLE, src, dst, sport, dport, proto)
    return 0, _mac_key(frame)


def _ports(frame: bytes, off: int, proto: int) -> tuple[int, int]:
    if proto in (6, 17) and len(frame) >= off + 4:
        return struct.unpack_from("!HH", frame, off)
    return 0, 0


def _mac(b: bytes) -> str:
    return ":".join(f"{x:02x}" for x in b)


def _mac_key(frame: bytes) -> FlowKey:
    # non-IP frames are kept and keyed by MAC addresses
    dst = _mac(frame[0:6]) if len(frame) >= 6 else ""
    src = _mac(frame[6:12]) if len(frame) >= 12 else ""
    return FlowKey(KeyMode.FIVE_TUPLE, src, dst, 0, 0, 0)


def parse_pcap(data: Union[bytes, bytearray, memoryview, io.BufferedIOBase],
               *, strict: bool = False) -> list[PacketRecord]:
    """Parse a classic libpcap capture into packet records.

    On a truncated record parsing stops.  With ``strict=False`` the records read
    so far are returned and a :class:`TruncatedRecordWarning` is emitted; with
    ``strict=True`` a :class:`TruncatedRecord` carrying them is raised.
    """
    if hasattr(data, "read"):
        data = data.read()
    buf = memoryview(bytes(data))
    if len(buf) < GLOBAL_HEADER_LEN:
        raise MalformedHeader(f"global header truncated ({len(buf)} of 24 bytes)")
    magic = struct.unpack_from("<I", buf, 0)[0]
    if magic == PCAP_MAGIC:
        endian = "<"
    elif magic == PCAP_MAGIC_SWAPPED:
        endian = ">"
    else:
        raise MalformedHeader(f"bad magic 0x{magic:08x}")
    _, _, _, _, _, network = struct.unpack_from(endian + "HHiIII", buf, 4)
    if network != LINKTYPE_ETHERNET:
        raise MalformedHeader(f"unsupported link type {network}")

    rec_fmt = endian + "IIII"
    records: list[PacketRecord] = []
    off = GLOBAL_HEADER_LEN
    while off < len(buf):
        if off + RECORD_HEADER_LEN > len(buf):
            return _truncated(records, off, "record header truncated", strict)
        ts_sec, ts_usec, incl_len, orig_len = struct.unpack_from(rec_fmt, buf, off)
        start = off + RECORD_HEADER_LEN
        if start + incl_len > len(buf):
            return _truncated(records, off, f"record needs {incl_len} bytes, "
                              f"{len(buf) - start} available", strict)
        proto, key = _decode_frame(bytes(buf[start:start + incl_len]))
        records.append(PacketRecord(ts_sec * 1_000_000 + ts_usec,
                                    min(orig_len, MAX_LENGTH), proto, key))
        off = start + incl_len
    return records


def _truncated(records, offset, reason, strict):
    msg = f"truncated record at byte {offset}: {reason}; kept {len(records)} records"
    if strict:
        raise TruncatedRecord(msg, records, offset)
    warnings.warn(msg, TruncatedRecordWarning, stacklevel=3)
    return records


def write_pcap(records: Iterable[PacketRecord], stream=None, *, endian: str = "<") -> bytes:
    """Write minimal Ethernet/IPv4 frames matching ``records``.

    Frames carry a 20-byte IPv4 header and, for TCP/UDP, source/destination
    ports; ``orig_len`` is the record length, the captured bytes are truncated
    to the headers.  Addresses that are not IPv4 literals are hashed into
    10.0.0.0/8.
    """
    out = bytearray(struct.pack(endian + "IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, 65535,
                                LINKTYPE_ETHERNET))
    for r in records:
        k = r.flow_key
        src = _as_ipv4(k.source_addr)
        dst = _as_ipv4(k.dest_addr or "10.255.255.254")
        ip = struct.pack("!BBHHHBBH4s4s", 0x45, 0, max(20, r.length_bytes - 14) & 0xFFFF,
                         0, 0, 64, r.proto_code, 0, src, dst)
        l4 = b""
        if r.proto_code in (6, 17):
            l4 = struct.pack("!HH", k.source_port or 0, k.dest_port or 0)
        frame = b"\x00\x00\x00\x00\x00\x02" + b"\x00\x00\x00\x00\x00\x01" \
            + struct.pack("!H", ETH_IPV4) + ip + l4
        sec, usec = divmod(r.timestamp_us, 1_000_000)
        out += struct.pack(endian + "IIII", sec, usec, len(frame), r.length_bytes)
        out += frame
    if stream is not None:
        stream.write(bytes(out))
    return bytes(out)


def _as_ipv4(addr: str) -> bytes:
    try:
        return ipaddress.IPv4Address(addr).packed
    except ValueError:
        h = sum((i + 1) * ord(c) for i, c in enumerate(addr)) % (1 << 24)
        return bytes([10, (h >> 16) & 0xFF, (h >> 8) & 0xFF, h & 0xFF])


# ---------------------------------------------------------------------------
# CSV

def parse_csv(stream: Union[str, TextIO, Iterable[str]]) -> list[PacketRecord]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise RowParseError(1, "missing header") from None
    header = [h.strip() for h in header]
    if header == CSV_HEADER:
        labeled = False
    elif header == CSV_HEADER + ["label"]:
        labeled = True
    else:
        raise RowParseError(1, f"unexpected header {','.join(header)!r}")

    width = len(header)
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != width:
            raise RowParseError(lineno, f"expected {width} fields, got {len(row)}")
        try:
            ts, length, proto = (int(x) for x in row[1:4])
            label = int(row[4]) if labeled else None
        except ValueError as exc:
            raise RowParseError(lineno, f"non-integer field ({exc})") from None
        if ts < 0 or not 0 <= length <= MAX_LENGTH or not 0 <= proto <= 255:
            raise RowParseError(lineno, "field out of range")
        if label not in (None, 0, 1):
            raise RowParseError(lineno, f"label must be 0 or 1, got {label}")
        records.append(PacketRecord(ts, length, proto,
                                    FlowKey(KeyMode.SOURCE_IP, row[0]), label))
    return records


def write_csv(records: Iterable[PacketRecord], stream: TextIO) -> None:
    records = list(records)
    labeled = any(r.label is not None for r in records)
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_HEADER + (["label"] if labeled else []))
    for r in records:
        row = [str(r.flow_key), r.timestamp_us, r.length_bytes, r.proto_code]
        if labeled:
            row.append(0 if r.label is None else r.label)
        w.writerow(row)


def read_trace(path: str) -> list[PacketRecord]:
    """Read a ``.pcap`` or ``.csv`` trace by file extension."""
    if str(path).endswith((".pcap", ".cap")):
        with open(path, "rb") as f:
            return parse_pcap(f)
    with open(path, newline="", encoding="utf-8") as f:
        return parse_csv(f)


# ---------------------------------------------------------------------------
# flows

class Flow:
    """One flow's packets as parallel arrays ordered by timestamp."""

    def __init__(self, key: FlowKey, timestamp_us, length_bytes, proto_code, labels=None):
        self.key = key
        self.timestamp_us = np.asarray(timestamp_us, dtype=np.int64)
        self.length_bytes = np.asarray(length_bytes, dtype=np.int64)
        self.proto_code = np.asarray(proto_code, dtype=np.int64)
        self.labels = None if labels is None else np.asarray(labels, dtype=np.int8)

    def __len__(self):
        return len(self.timestamp_us)

    def __iter__(self) -> Iterator[PacketRecord]:
        return self.records()

    def __repr__(self):
        return f"Flow({str(self.key)!r}, packets={len(self)})"

    @property
    def malicious(self) -> bool:
        return self.labels is not None and bool(np.any(self.labels == 1))

    @property
    def duration_us(self) -> int:
        return int(self.timestamp_us[-1] - self.timestamp_us[0]) if len(self) else 0

    @property
    def byte_count(self) -> int:
        return int(self.length_bytes.sum())

    def records(self) -> Iterator[PacketRecord]:
        for i in range(len(self)):
            label = None if self.labels is None else int(self.labels[i])
            yield PacketRecord(int(self.timestamp_us[i]), int(self.length_bytes[i]),
                               int(self.proto_code[i]), self.key, label)

    def head(self, n: int) -> "Flow":
        return self.slice(0, n)

    def slice(self, start: int, stop: int) -> "Flow":
        """Packets ``start:stop`` as a flow sharing this flow's arrays."""
        labels = None if self.labels is None else self.labels[start:stop]
        return Flow(self.key, self.timestamp_us[start:stop], self.length_bytes[start:stop],
                    self.proto_code[start:stop], labels)


class FlowTable:
    """Per-flow packet buffers with an optional bound on buffered packets.

    When ``watermark`` is set, adding a packet that pushes the total above it
    evicts whole flows, oldest first (by creation), until the bound holds again.
    Evicted flows are returned from :meth:`add` as completed segments.
    """

    def __init__(self, mode: KeyMode = KeyMode.SOURCE_IP, watermark: Optional[int] = None):
        if watermark is not None and watermark < 1:
            raise ValueError("watermark must be >= 1")
        self.mode = KeyMode(mode)
        self.watermark = watermark
        self._buf: dict[FlowKey, list[tuple]] = {}
        self._frozen: dict[FlowKey, Flow] = {}
        self.buffered = 0

    def add(self, record: PacketRecord) -> list[Flow]:
        key = record.flow_key.project(self.mode)
        rows = self._buf.get(key)
        if rows is None:
            rows = self._buf[key] = []
        self._frozen.pop(key, None)
        row = (record.timestamp_us, record.length_bytes, record.proto_code,
               -1 if record.label is None else record.label)
        if rows and rows[-1][0] > row[0]:
            # stable insert after equal timestamps
            pos = bisect.bisect_right([r[0] for r in rows], row[0])
            rows.insert(pos, row)
        else:
            rows.append(row)
        self.buffered += 1
        evicted = []
        while self.watermark is not None and self.buffered > self.watermark:
            evicted.append(self.pop(next(iter(self._buf))))
        return evicted

    def extend(self, records: Iterable[PacketRecord]) -> list[Flow]:
        evicted = []
        for r in records:
            evicted.extend(self.add(r))
        return evicted

    def pop(self, key: FlowKey) -> Flow:
        flow = self[key]
        del self._buf[key]
        self._frozen.pop(key, None)
        self.buffered -= len(flow)
        return flow

    def __getitem__(self, key: FlowKey) -> Flow:
        flow = self._frozen.get(key)
        if flow is None:
            rows = self._buf[key]
            arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
            labels = None if (arr[:, 3] < 0).any() else arr[:, 3]
            flow = self._frozen[key] = Flow(key, arr[:, 0], arr[:, 1], arr[:, 2], labels)
        return flow

    def __contains__(self, key) -> bool:
        return key in self._buf

    def __len__(self) -> int:
        return len(self._buf)

    def __iter__(self) -> Iterator[Flow]:
        return iter(self.flows())

    def keys(self) -> list[FlowKey]:
        return sorted(self._buf, key=FlowKey.sort_key)

    def flows(self) -> list[Flow]:
        """All flows in deterministic key order."""
        return [self[k] for k in self.keys()]

    def counts(self) -> dict[FlowKey, int]:
        return {k: len(v) for k, v in self._buf.items()}


def group_flows(records: Iterable[PacketRecord], key_mode: KeyMode = KeyMode.SOURCE_IP,
                watermark: Optional[int] = None) -> FlowTable:
    table = FlowTable(key_mode, watermark)
    table.extend(records)
    return table


def to_feature_rows(flow: Union[Flow, Sequence[PacketRecord]]) -> np.ndarray:
    """Per-packet feature matrix with columns [proto_code, inter_arrival_us, length].

    The first packet's inter-arrival time is 0.
    """
    if not isinstance(flow, Flow):
        flow = list(flow)
        flow = Flow(None, [r.timestamp_us for r in flow], [r.length_bytes for r in flow],
                    [r.proto_code for r in flow])
    n = len(flow)
    if n == 0:
        raise EmptyFlow("flow has no packets")
    s = np.empty((n, 3), dtype=np.float64)
    s[:, 0] = flow.proto_code
    s[0, 1] = 0.0
    np.subtract(flow.timestamp_us[1:], flow.timestamp_us[:-1], out=s[1:, 1], casting="unsafe")
    s[:, 2] = flow.length_bytes
    return s
