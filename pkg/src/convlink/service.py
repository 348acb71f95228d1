"""JSON linking endpoint with in-memory per-conversation discourse state."""
from __future__ import annotations

import json
import logging
import threading
import time
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .discourse import DiscourseState
from .errors import BackendError, InputError, LinkerError, ParseError, ProtocolError, SequencingError
from .pipeline import Linker

log = logging.getLogger(__name__)

DEFAULT_IDLE_SECONDS = 1800.0


class _Session:
    __slots__ = ("state", "lock", "last_used")

    def __init__(self, conversation_id: str):
        self.state = DiscourseState(conversation_id)
        self.lock = threading.Lock()
        self.last_used = time.monotonic()


class LinkService:
    """Routes turns to per-conversation state; turns of one conversation are serialized."""

    def __init__(self, linker: Linker, idle_seconds: float = DEFAULT_IDLE_SECONDS):
        self.linker = linker
        self.idle_seconds = idle_seconds
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()

    def _session(self, conversation_id: str) -> _Session:
        now = time.monotonic()
        with self._lock:
            for cid in [c for c, s in self._sessions.items()
                        if now - s.last_used > self.idle_seconds and not s.lock.locked()]:
                del self._sessions[cid]
            sess = self._sessions.get(conversation_id)
            if sess is None:
                sess = self._sessions[conversation_id] = _Session(conversation_id)
            sess.last_used = now
            return sess

    def __len__(self) -> int:
        return len(self._sessions)

    def link(self, request: dict) -> dict:
        utterance = request.get("utterance")
        conversation_id = request.get("conversation_id", "default")
        if not isinstance(utterance, str):
            raise InputError("'utterance' must be a string")
        if not isinstance(conversation_id, str) or not conversation_id:
            raise InputError("'conversation_id' must be a non-empty string")
        turn = request.get("turn")
        if turn is not None and not isinstance(turn, int):
            raise InputError("'turn' must be an integer")
        sess = self._session(conversation_id)
        with sess.lock:
            result = self.linker.link_utterance(sess.state, utterance, speaker=request.get("speaker", "user"),
                                                turn=turn, parse=request.get("parse"))
            sess.state = result.state
            sess.last_used = time.monotonic()
        return result.to_record()


def make_handler(service: LinkService):
    class Handler(BaseHTTPRequestHandler):
        server_version = "convlink/0.1"

        def log_message(self, fmt, *args):
            log.info("%s - %s", self.address_string(), fmt % args)

        def _send(self, status: int, payload) -> None:
            body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/health":
                self._send(HTTPStatus.OK, {"status": "ok", "sessions": len(service)})
            else:
                self._send(HTTPStatus.NOT_FOUND, {"error": "not found"})

        def do_POST(self):
            if self.path != "/link":
                self._send(HTTPStatus.NOT_FOUND, {"error": "not found"})
                return
            try:
                length = int(self.headers.get("Content-Length") or 0)
                request = json.loads(self.rfile.read(length) or b"null")
                if not isinstance(request, dict):
                    raise InputError("request body must be a JSON object")
                record = service.link(request)
            except (json.JSONDecodeError, UnicodeDecodeError, ValueError) as exc:
                self._send(HTTPStatus.BAD_REQUEST, {"error": f"malformed request: {exc}"})
            except (InputError, ParseError, SequencingError) as exc:
                self._send(HTTPStatus.BAD_REQUEST, {"error": str(exc)})
            except (BackendError, ProtocolError) as exc:
                self._send(HTTPStatus.BAD_GATEWAY, {"error": str(exc)})
            except LinkerError as exc:
                self._send(HTTPStatus.INTERNAL_SERVER_ERROR, {"error": str(exc)})
            else:
                self._send(HTTPStatus.OK, record)

    return Handler


def make_server(service: LinkService, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), make_handler(service))
    server.daemon_threads = True
    return server
