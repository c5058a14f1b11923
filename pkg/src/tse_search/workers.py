"""Client side of the external worker protocol.

Wire format, over the worker's standard input/output:
  * every message is an 8-byte little-endian unsigned length N, then N bytes
    of UTF-8 JSON header, then raw binary payloads concatenated in
    header-declared order;
  * each payload is ``len`` float32 little-endian samples;
  * the engine opens with ``{"op":"hello","version":1}`` and the worker
    answers ``{"ok":true,"ops":[...]}``.

One worker process per handle; requests are serialized per worker, so a
handle is deterministic but not concurrent-safe.
"""

from __future__ import annotations

import json
import os
import selectors
import struct
import subprocess
import threading
import time

import numpy as np

from .errors import (
    WorkerCrashedError,
    WorkerFailure,
    WorkerProtocolError,
    WorkerSpawnError,
    WorkerTimeoutError,
)

PROTOCOL_VERSION = 1
_HEADER_CAP = 1 << 20  # sanity bound on JSON header size


def encode_message(header: dict, payloads: dict[str, np.ndarray] | None = None) -> bytes:
    """Serialize one protocol message (shared by client code and test workers)."""
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    parts = [struct.pack("<Q", len(blob)), blob]
    for entry in header.get("payloads", []):
        parts.append(np.ascontiguousarray(payloads[entry["name"]], dtype="<f4").tobytes())
    return b"".join(parts)


class _Stream:
    """Deadline-based exact reads from a worker's stdout file descriptor.

    Reads through os.read on the raw fd (never the buffered wrapper) so that
    select() always reflects what is actually left to consume.
    """

    def __init__(self, pipe):
        self._fd = pipe.fileno()
        os.set_blocking(self._fd, False)
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._fd, selectors.EVENT_READ)

    def read_exact(self, n: int, deadline: float | None) -> bytes:
        chunks = []
        remaining = n
        while remaining > 0:
            if deadline is not None:
                budget = deadline - time.monotonic()
                if budget <= 0:
                    raise WorkerTimeoutError(f"timed out waiting for {remaining} of {n} bytes")
            else:
                budget = None
            if not self._selector.select(budget):
                raise WorkerTimeoutError(f"timed out waiting for {remaining} of {n} bytes")
            try:
                chunk = os.read(self._fd, remaining)
            except BlockingIOError:
                continue
            if chunk == b"":
                raise EOFError
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def close(self):
        self._selector.close()


class ExternalWorker:
    """A spawned worker process speaking the length-prefixed protocol."""

    def __init__(self, command: list[str], timeout: float = 30.0):
        self.command = list(command)
        self.timeout = float(timeout)
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise WorkerSpawnError(f"could not spawn {self.command}: {exc}") from exc
        self._stream = _Stream(self._proc.stdout)
        self._lock = threading.Lock()
        self.ops = self._handshake()

    def _handshake(self) -> tuple[str, ...]:
        reply = self._roundtrip({"op": "hello", "version": PROTOCOL_VERSION}, {}, expect_payloads=False)
        ops = reply.get("ops")
        if not isinstance(ops, list) or not all(op in ("extract", "score") for op in ops):
            raise WorkerProtocolError(f"handshake declared invalid ops: {ops!r}")
        return tuple(ops)

    def _fail_crashed(self, context: str):
        try:
            self._proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        raise WorkerCrashedError(
            f"worker {self.command} exited with status {self._proc.returncode} {context}"
        )

    def _read_message(self, deadline, expect_payloads: bool):
        try:
            raw_len = self._stream.read_exact(8, deadline)
        except EOFError:
            self._fail_crashed("before sending a response header")
        (header_len,) = struct.unpack("<Q", raw_len)
        if header_len == 0 or header_len > _HEADER_CAP:
            raise WorkerProtocolError(f"implausible header length {header_len}")
        try:
            header_bytes = self._stream.read_exact(header_len, deadline)
        except EOFError:
            self._fail_crashed("mid-header")
        try:
            header = json.loads(header_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise WorkerProtocolError(f"response header is not valid JSON: {exc}") from exc
        if not isinstance(header, dict) or "ok" not in header:
            raise WorkerProtocolError(f"response header missing 'ok' field: {header!r}")
        if header.get("ok") and not expect_payloads and header.get("payloads"):
            raise WorkerProtocolError(f"unexpected payloads in response: {header!r}")
        payloads = {}
        if header.get("ok") and expect_payloads:
            for entry in header.get("payloads", []):
                if not isinstance(entry, dict) or "name" not in entry or "len" not in entry:
                    raise WorkerProtocolError(f"malformed payload declaration: {entry!r}")
                try:
                    data = self._stream.read_exact(4 * int(entry["len"]), deadline)
                except EOFError:
                    self._fail_crashed("mid-payload")
                payloads[entry["name"]] = np.frombuffer(data, dtype="<f4")
        return header, payloads

    def _roundtrip(self, header: dict, payloads: dict, expect_payloads: bool):
        with self._lock:
            if self._proc.poll() is not None:
                raise WorkerCrashedError(
                    f"worker {self.command} already exited with status {self._proc.returncode}"
                )
            message = encode_message(header, payloads)
            deadline = time.monotonic() + self.timeout if self.timeout else None
            try:
                self._proc.stdin.write(message)
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                self._fail_crashed("while receiving a request")
            reply, reply_payloads = self._read_message(deadline, expect_payloads)
            if not reply.get("ok"):
                raise WorkerFailure(
                    f"worker {self.command} reported: {reply.get('error', 'unspecified error')}"
                )
            reply["_payloads"] = reply_payloads
            return reply

    def extract(self, samples: np.ndarray, enrollment: np.ndarray, sample_rate: int) -> np.ndarray:
        header = {
            "op": "extract",
            "sample_rate": int(sample_rate),
            "payloads": [
                {"name": "input", "len": int(samples.size)},
                {"name": "enrollment", "len": int(enrollment.size)},
            ],
        }
        reply = self._roundtrip(header, {"input": samples, "enrollment": enrollment}, expect_payloads=True)
        estimate = reply["_payloads"].get("estimate")
        if estimate is None:
            raise WorkerProtocolError("extract response carried no 'estimate' payload")
        if estimate.size != samples.size:
            raise WorkerProtocolError(
                f"estimate has {estimate.size} samples, expected {samples.size}"
            )
        return estimate.astype(np.float64)

    def score(self, samples: np.ndarray, enrollment: np.ndarray, sample_rate: int) -> float:
        header = {
            "op": "score",
            "sample_rate": int(sample_rate),
            "payloads": [
                {"name": "input", "len": int(samples.size)},
                {"name": "enrollment", "len": int(enrollment.size)},
            ],
        }
        reply = self._roundtrip(header, {"input": samples, "enrollment": enrollment}, expect_payloads=False)
        score = reply.get("score")
        if not isinstance(score, (int, float)) or isinstance(score, bool):
            raise WorkerProtocolError(f"score response carried no numeric 'score': {score!r}")
        return float(score)

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._stream.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
