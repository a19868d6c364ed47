"""Offline stand-in for the chat endpoint so nothing in CI needs a network.

Serves the chat-completion wire format on localhost. Three behaviors:

- ``echo-gold``: answer with the document's gold-marked text (a perfect
  detector) and confirm every verification question.
- ``perturb``: like echo-gold, but rewrite ~5% of the characters outside
  marked entities first, imitating an LLM that does not copy faithfully.
- ``deny-all``: detect nothing and reject every verification question.
"""

from __future__ import annotations

import hashlib
import json
import random
import string
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping, Sequence

from . import codec
from .corpus import Document, Span
from .detect import FEWSHOT_TARGET_LEAD, FINETUNE_USER_INSTRUCTION

MODES = ("echo-gold", "perturb", "deny-all")
PERTURB_RATE = 0.05


def extract_target_text(user_content: str) -> str:
    """Pull the document text back out of a detection prompt."""
    if FEWSHOT_TARGET_LEAD in user_content:
        tail = user_content.rsplit(FEWSHOT_TARGET_LEAD, 1)[1]
        return tail[1:] if tail[:1] in (" ", "\n") else tail
    if user_content.startswith(FINETUNE_USER_INSTRUCTION):
        remainder = user_content[len(FINETUNE_USER_INSTRUCTION) :]
        return remainder[1:] if remainder.startswith("\n") else remainder
    return user_content


def perturb_outside_spans(text: str, spans: Sequence[Span], seed: int) -> str:
    """Substitute ~5% of the letters that no span covers; offsets unchanged."""
    protected = set()
    for span in spans:
        protected.update(range(span.start, span.end))
    rng = random.Random(seed)
    chars = list(text)
    for i, ch in enumerate(chars):
        if i in protected or not ch.isalpha():
            continue
        if rng.random() < PERTURB_RATE:
            replacement = rng.choice(string.ascii_lowercase)
            while replacement == ch:
                replacement = rng.choice(string.ascii_lowercase)
            chars[i] = replacement
    return "".join(chars)


class MockLlm:
    """Request-independent response logic, reusable without the HTTP layer."""

    def __init__(
        self,
        mode: str,
        gold_by_text: Mapping[str, Sequence[Span]],
        seed: int = 0,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.mode = mode
        self.gold_by_text = dict(gold_by_text)
        self.seed = seed

    def respond(self, body: Mapping) -> str:
        messages = body.get("messages", [])
        user_content = next(
            (m.get("content", "") for m in reversed(messages) if m.get("role") == "user"),
            "",
        )
        if user_content.startswith("Determine if "):
            return "F" if self.mode == "deny-all" else "T"

        text = extract_target_text(user_content)
        spans = list(self.gold_by_text.get(text, ()))
        if self.mode == "deny-all" or not spans:
            return text
        if self.mode == "perturb":
            # Seeded by content so replays of the same request are identical.
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            doc_seed = self.seed ^ int.from_bytes(digest[:8], "big")
            text = perturb_outside_spans(text, spans, doc_seed)
        doc = Document(id="mock", text=text)
        return codec.encode(doc, spans)


def _completion_payload(content: str) -> dict:
    return {
        "id": "mock-completion",
        "object": "chat.completion",
        "model": "mock",
        "choices": [
            {
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop",
            }
        ],
    }


class _Handler(BaseHTTPRequestHandler):
    mock: MockLlm  # injected by make_server

    def do_POST(self):  # noqa: N802 (http.server API)
        length = int(self.headers.get("Content-Length", "0"))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
            content = self.mock.respond(body)
        except Exception as exc:  # a broken request must not kill the server
            payload = json.dumps({"error": str(exc)}).encode("utf-8")
            self.send_response(400)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)
            return
        payload = json.dumps(_completion_payload(content)).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, fmt, *args):  # silence per-request stderr noise
        pass


def make_server(mock: MockLlm, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"mock": mock})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
