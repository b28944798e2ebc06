"""Binary wire format for the meter / privacy-component / back-end links.

Frame layout (all integers big-endian):

    magic   2 bytes  b"PB"
    version 1 byte   0x01
    kind    1 byte   message kind
    length  4 bytes  payload byte count
    payload

Report payloads carry a column table in the style of metering table
protocols: a declared column bitmap followed by the column data.  The meter
form declares {i, v, comm, r}; the privacy form declares {i, comm} plus the
summary fields (price, r').  The privacy form has no slots for plaintext
values or blindings; a frame whose payload carries more data than its
declared columns is rejected.

Common payload primitives:

    str     2-byte length + utf-8 bytes
    i0      8 bytes
    n       4 bytes
    value   4 bytes (consumption units / tariff rates)
    element fixed group element width (group dependent)
    scalar  fixed scalar width (group dependent)
    price   2-byte length + minimal magnitude bytes (unbounded integer)
    sig     2-byte length + raw bytes
"""

from __future__ import annotations

from dataclasses import dataclass

from .group import ElementDecodeError, GroupParams, UnknownGroupError, derive_params
from .metering import CommitmentReport, ReportRow
from .privacy import BillingReport

MAGIC = b"PB"
VERSION = 1
HEADER_LEN = 8
MAX_PAYLOAD = 1 << 24
MAX_ROWS = 1 << 16

KIND_REPORT = 1
KIND_TARIFF_REQUEST = 2
KIND_TARIFF = 3
KIND_VERDICT = 4

COL_I = 0x01
COL_V = 0x02
COL_COMM = 0x04
COL_R = 0x08
COL_SUMMARY = 0x10

METER_COLUMNS = COL_I | COL_V | COL_COMM | COL_R
PRIVACY_COLUMNS = COL_I | COL_COMM | COL_SUMMARY

METER_FORM = "meter-form"
PRIVACY_FORM = "privacy-form"


class WireError(ValueError):
    """Structured decode/encode failure; never an unhandled crash."""


@dataclass(frozen=True)
class ReportTable:
    """Decoded column table; optional columns are None when not declared."""

    meter_id: str
    group_id: str
    i0: int
    n: int
    columns: int
    comm_column: tuple[int, ...]
    values: tuple[int, ...] | None
    randomness: tuple[int, ...] | None
    price: int | None
    r_prime: int | None
    sig: bytes


@dataclass(frozen=True)
class TariffRequest:
    meter_id: str
    i0: int
    n: int


@dataclass(frozen=True)
class TariffMessage:
    meter_id: str
    i0: int
    rates: tuple[int, ...]


@dataclass(frozen=True)
class VerdictMessage:
    meter_id: str
    i0: int
    accepted: bool
    reason: str


Message = ReportTable | TariffRequest | TariffMessage | VerdictMessage


def meter_table(group_id: str, report: CommitmentReport) -> ReportTable:
    return ReportTable(
        meter_id=report.meter_id,
        group_id=group_id,
        i0=report.i0,
        n=report.n,
        columns=METER_COLUMNS,
        comm_column=report.comm_column,
        values=report.values,
        randomness=report.randomness,
        price=None,
        r_prime=None,
        sig=report.sig,
    )


def privacy_table(group_id: str, billing: BillingReport) -> ReportTable:
    return ReportTable(
        meter_id=billing.meter_id,
        group_id=group_id,
        i0=billing.i0,
        n=billing.n,
        columns=PRIVACY_COLUMNS,
        comm_column=billing.comm_column,
        values=None,
        randomness=None,
        price=billing.price,
        r_prime=billing.r_prime,
        sig=billing.sig,
    )


def table_to_report(table: ReportTable) -> CommitmentReport:
    if detect_mode(table) != METER_FORM:
        raise WireError("not a meter-form table")
    assert table.values is not None and table.randomness is not None
    rows = tuple(
        ReportRow(interval=table.i0 + k, value=v, commitment=c, randomness=r)
        for k, (v, c, r) in enumerate(
            zip(table.values, table.comm_column, table.randomness)
        )
    )
    return CommitmentReport(meter_id=table.meter_id, i0=table.i0, rows=rows, sig=table.sig)


def table_to_billing(table: ReportTable) -> BillingReport:
    if detect_mode(table) != PRIVACY_FORM:
        raise WireError("not a privacy-form table")
    assert table.price is not None and table.r_prime is not None
    return BillingReport(
        meter_id=table.meter_id,
        i0=table.i0,
        price=table.price,
        r_prime=table.r_prime,
        comm_column=table.comm_column,
        sig=table.sig,
    )


def detect_mode(table: ReportTable) -> str:
    """Which protocol mode the declared column set selects."""
    if table.columns == METER_COLUMNS:
        return METER_FORM
    if table.columns == PRIVACY_COLUMNS:
        return PRIVACY_FORM
    raise WireError(f"ambiguous column set 0x{table.columns:02x}")


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def u8(self, v: int):
        self.parts.append(v.to_bytes(1, "big"))

    def u32(self, v: int):
        self.parts.append(v.to_bytes(4, "big"))

    def u64(self, v: int):
        self.parts.append(v.to_bytes(8, "big"))

    def string(self, s: str):
        raw = s.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise WireError("string field too long")
        self.parts.append(len(raw).to_bytes(2, "big"))
        self.parts.append(raw)

    def blob(self, b: bytes):
        if len(b) > 0xFFFF:
            raise WireError("blob field too long")
        self.parts.append(len(b).to_bytes(2, "big"))
        self.parts.append(b)

    def bigint(self, v: int):
        if v < 0:
            raise WireError("negative integer not encodable")
        raw = v.to_bytes((v.bit_length() + 7) // 8, "big") if v else b""
        self.blob(raw)

    def done(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise WireError("truncated payload")
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def string(self) -> str:
        length = int.from_bytes(self.take(2), "big")
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError:
            raise WireError("invalid utf-8 in string field") from None

    def blob(self) -> bytes:
        length = int.from_bytes(self.take(2), "big")
        return self.take(length)

    def bigint(self) -> int:
        return int.from_bytes(self.blob(), "big")

    def expect_end(self):
        if self.pos != len(self.data):
            raise WireError("trailing data beyond declared columns")


def _group_for(group_id: str) -> GroupParams:
    try:
        return derive_params(group_id)
    except UnknownGroupError:
        raise WireError(f"unknown group_id: {group_id!r}") from None


def _encode_report(table: ReportTable) -> bytes:
    mode = detect_mode(table)
    params = _group_for(table.group_id)
    if len(table.comm_column) != table.n:
        raise WireError("commitment column length does not match n")
    w = _Writer()
    w.string(table.meter_id)
    w.string(table.group_id)
    w.u64(table.i0)
    w.u32(table.n)
    w.u8(table.columns)
    if mode == METER_FORM:
        if table.values is None or table.randomness is None:
            raise WireError("meter-form table missing plaintext columns")
        if len(table.values) != table.n or len(table.randomness) != table.n:
            raise WireError("plaintext column length does not match n")
        for v in table.values:
            w.u32(v)
    for c in table.comm_column:
        w.parts.append(params.encode_element(c))
    if mode == METER_FORM:
        for r in table.randomness:  # type: ignore[union-attr]
            w.parts.append(params.encode_scalar(r))
    else:
        if table.values is not None or table.randomness is not None:
            raise WireError("privacy-form table must not carry plaintext columns")
        if table.price is None or table.r_prime is None:
            raise WireError("privacy-form table missing summary fields")
        w.bigint(table.price)
        w.parts.append(params.encode_scalar(table.r_prime))
    w.blob(table.sig)
    return w.done()


def _decode_report(r: _Reader) -> ReportTable:
    meter_id = r.string()
    group_id = r.string()
    params = _group_for(group_id)
    i0 = r.u64()
    n = r.u32()
    if n < 1 or n > MAX_ROWS:
        raise WireError(f"row count {n} out of range")
    columns = r.u8()
    if columns not in (METER_COLUMNS, PRIVACY_COLUMNS):
        raise WireError(f"undeclarable column set 0x{columns:02x}")
    values = None
    randomness = None
    price = None
    r_prime = None
    if columns == METER_COLUMNS:
        values = tuple(r.u32() for _ in range(n))
    try:
        comm_column = tuple(
            params.decode_element(r.take(params.element_len)) for _ in range(n)
        )
        if columns == METER_COLUMNS:
            randomness = tuple(
                params.decode_scalar(r.take(params.scalar_len)) for _ in range(n)
            )
        else:
            price = r.bigint()
            r_prime = params.decode_scalar(r.take(params.scalar_len))
    except ElementDecodeError as exc:
        raise WireError(str(exc)) from None
    sig = r.blob()
    r.expect_end()
    return ReportTable(
        meter_id=meter_id,
        group_id=group_id,
        i0=i0,
        n=n,
        columns=columns,
        comm_column=comm_column,
        values=values,
        randomness=randomness,
        price=price,
        r_prime=r_prime,
        sig=sig,
    )


def encode_message(msg: Message) -> bytes:
    if isinstance(msg, ReportTable):
        kind, payload = KIND_REPORT, _encode_report(msg)
    elif isinstance(msg, TariffRequest):
        w = _Writer()
        w.string(msg.meter_id)
        w.u64(msg.i0)
        w.u32(msg.n)
        kind, payload = KIND_TARIFF_REQUEST, w.done()
    elif isinstance(msg, TariffMessage):
        w = _Writer()
        w.string(msg.meter_id)
        w.u64(msg.i0)
        w.u32(len(msg.rates))
        for rate in msg.rates:
            w.u32(rate)
        kind, payload = KIND_TARIFF, w.done()
    elif isinstance(msg, VerdictMessage):
        w = _Writer()
        w.string(msg.meter_id)
        w.u64(msg.i0)
        w.u8(1 if msg.accepted else 0)
        w.string(msg.reason)
        kind, payload = KIND_VERDICT, w.done()
    else:
        raise WireError(f"unencodable message type {type(msg).__name__}")
    header = MAGIC + bytes([VERSION, kind]) + len(payload).to_bytes(4, "big")
    return header + payload


def decode_message(frame: bytes) -> Message:
    if len(frame) < HEADER_LEN:
        raise WireError("truncated frame header")
    if frame[:2] != MAGIC:
        raise WireError("bad magic")
    if frame[2] != VERSION:
        raise WireError(f"unsupported version {frame[2]}")
    kind = frame[3]
    length = int.from_bytes(frame[4:8], "big")
    if length > MAX_PAYLOAD:
        raise WireError("declared payload too large")
    if len(frame) != HEADER_LEN + length:
        raise WireError("frame length does not match declared payload size")
    r = _Reader(frame[HEADER_LEN:])
    if kind == KIND_REPORT:
        return _decode_report(r)
    if kind == KIND_TARIFF_REQUEST:
        msg = TariffRequest(meter_id=r.string(), i0=r.u64(), n=r.u32())
        r.expect_end()
        return msg
    if kind == KIND_TARIFF:
        meter_id = r.string()
        i0 = r.u64()
        n = r.u32()
        if n < 1 or n > MAX_ROWS:
            raise WireError(f"rate count {n} out of range")
        rates = tuple(r.u32() for _ in range(n))
        r.expect_end()
        return TariffMessage(meter_id=meter_id, i0=i0, rates=rates)
    if kind == KIND_VERDICT:
        msg = VerdictMessage(
            meter_id=r.string(), i0=r.u64(), accepted=r.u8() != 0, reason=r.string()
        )
        r.expect_end()
        return msg
    raise WireError(f"unknown message kind {kind}")


def write_frame(stream, msg: Message) -> None:
    """Send one framed message over a socket-like object."""
    stream.sendall(encode_message(msg))


def read_frame(stream) -> Message | None:
    """Read one framed message; None on clean EOF at a frame boundary."""
    header = _read_exact(stream, HEADER_LEN, allow_eof=True)
    if header is None:
        return None
    if header[:2] != MAGIC:
        raise WireError("bad magic")
    length = int.from_bytes(header[4:8], "big")
    if length > MAX_PAYLOAD:
        raise WireError("declared payload too large")
    payload = _read_exact(stream, length, allow_eof=False)
    assert payload is not None
    return decode_message(header + payload)


def _read_exact(stream, count: int, allow_eof: bool) -> bytes | None:
    buf = b""
    while len(buf) < count:
        chunk = stream.recv(count - len(buf))
        if not chunk:
            if allow_eof and not buf:
                return None
            raise WireError("connection closed mid-frame")
        buf += chunk
    return buf
