"""Black-box feed sources.

A source answers ``query(x)`` with a list of feed items and nothing else. The
auditor never sees how the feed was produced. Two transports exist: a plain
Python callable, and an external executable speaking one JSON object per line
on stdin/stdout::

    -> {"id": "input-000", "payload": [...], "m": 30}
    <- {"id": "input-000", "items": [0.12, -1.3, ...]}
"""
from __future__ import annotations

import json
import logging
import queue
import shutil
import subprocess
import threading

from .errors import SourceError

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0


class FeedSource:
    kind = "abstract"

    def __init__(self, name):
        self.name = name

    def query(self, x):
        raise NotImplementedError

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class InProcessSource(FeedSource):
    """Wraps ``fn(x) -> items``."""

    kind = "in-process"

    def __init__(self, fn, name="in-process"):
        super().__init__(name)
        self._fn = fn

    def query(self, x):
        try:
            return self._fn(x)
        except SourceError:
            raise
        except Exception as exc:
            raise SourceError(self.name, f"{type(exc).__name__}: {exc}", getattr(x, "id", None)) from exc


class SubprocessSource(FeedSource):
    """Runs an external program and talks to it over line-delimited JSON.

    The child is started on the first query and kept alive for the run. Access is
    serialised with a lock, so concurrent auditors share one child safely.
    """

    kind = "subprocess"

    def __init__(self, command, name="subprocess", m=None, timeout=DEFAULT_TIMEOUT, cwd=None, env=None):
        super().__init__(name)
        if isinstance(command, str):
            command = [command]
        self.command = list(command)
        self.m = m
        self.timeout = float(timeout)
        self.cwd = cwd
        self.env = env
        self._proc = None
        self._lines = None
        self._lock = threading.Lock()

    def _start(self):
        if not self.command or shutil.which(self.command[0]) is None and "/" not in self.command[0]:
            raise SourceError(self.name, f"executable not found: {self.command[:1]}")
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
                cwd=self.cwd,
                env=self.env,
            )
        except OSError as exc:
            raise SourceError(self.name, f"cannot launch {self.command!r}: {exc}") from exc
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc.stdout, self._lines), daemon=True).start()

    @staticmethod
    def _pump(stream, sink):
        for line in stream:
            sink.put(line)
        sink.put(None)

    def _exit_error(self, input_id):
        code = self._proc.wait(timeout=5)
        err = (self._proc.stderr.read() or "").strip()
        tail = f": {err.splitlines()[-1]}" if err else ""
        return SourceError(self.name, f"process exited with status {code}{tail}", input_id)

    def query(self, x):
        input_id = x.id
        with self._lock:
            if self._proc is None:
                self._start()
            if self._proc.poll() is not None:
                raise self._exit_error(input_id)
            request = {"id": input_id, "payload": x.payload}
            if self.m is not None:
                request["m"] = int(self.m)
            try:
                self._proc.stdin.write(json.dumps(request) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                raise self._exit_error(input_id) from None
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                self._kill()
                raise SourceError(self.name, f"no reply within {self.timeout:g}s", input_id) from None
            if line is None:
                raise self._exit_error(input_id)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SourceError(self.name, f"malformed reply: {exc}", input_id) from exc
        if not isinstance(reply, dict) or "items" not in reply:
            raise SourceError(self.name, "reply lacks an 'items' list", input_id)
        if reply.get("id") != input_id:
            raise SourceError(self.name, f"reply id {reply.get('id')!r} does not match query", input_id)
        if not isinstance(reply["items"], list):
            raise SourceError(self.name, "'items' is not a list", input_id)
        return reply["items"]

    def _kill(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def close(self):
        if self._proc is None:
            return
        try:
            if self._proc.poll() is None:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
        except (subprocess.TimeoutExpired, OSError):
            log.warning("source %s did not exit cleanly; killing", self.name)
            self._kill()
        finally:
            for stream in (self._proc.stdout, self._proc.stderr):
                if stream is not None:
                    stream.close()
            self._proc = None
