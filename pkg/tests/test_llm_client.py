import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from fctnrank.errors import ClientUnavailable, ContextOverflow, ProtocolError, ScriptExhausted
from fctnrank.llm_client import ChatMessage, ClientParams, Conversation, HttpChatClient, ScriptedClient, token_budget_check


def conv(*texts):
    c = Conversation()
    c.append(ChatMessage("system", "sys"))
    for t in texts:
        c.append(ChatMessage("user", t))
    return c


def test_message_validation():
    with pytest.raises(ValueError):
        ChatMessage("tool", "x")
    with pytest.raises(ValueError):
        ChatMessage("user", "")
    with pytest.raises(ValueError):
        Conversation().append(ChatMessage("user", "hi"))


def test_params_validation():
    with pytest.raises(ValueError):
        ClientParams(max_output_tokens=0)
    with pytest.raises(ValueError):
        ClientParams(max_output_tokens=10, context_window_tokens=10)


def test_scripted_client_sequence():
    client = ScriptedClient(["resp-A", "resp-B"])
    c = conv("q")
    assert client.send(c, ClientParams()).content == "resp-A"
    assert client.send(c, ClientParams()).content == "resp-B"
    with pytest.raises(ScriptExhausted):
        client.send(c, ClientParams())
    assert client.received[0] == [{"role": "system", "content": "sys"}, {"role": "user", "content": "q"}]
    assert len(c) == 2  # send never appends


def test_scripted_from_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(["a", "b"]))
    assert ScriptedClient.from_file(p).responses == ["a", "b"]
    p.write_text(json.dumps({"a": 1}))
    with pytest.raises(ValueError):
        ScriptedClient.from_file(p)


def test_token_budget_examples():
    assert token_budget_check(Conversation(), ClientParams()) == (3000, True)
    c = conv("0123456789")  # "sys" is 1 token, ten characters are 3
    assert token_budget_check(c, ClientParams())[0] == 3000 + 1 + 3
    big = conv("x" * (4 * 127_000))
    projected, ok = token_budget_check(big, ClientParams())
    assert projected > 128_000 and not ok
    with pytest.raises(ContextOverflow):
        ScriptedClient(["r"]).send(big, ClientParams())


class _Stub:
    """Tiny chat-completions server; ``plan`` lists (status, body) per request."""

    def __init__(self, plan):
        self.plan = list(plan)
        self.requests = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                n = int(self.headers["Content-Length"])
                stub.requests.append((dict(self.headers), json.loads(self.rfile.read(n))))
                status, body = stub.plan.pop(0) if len(stub.plan) > 1 else stub.plan[0]
                raw = body.encode() if isinstance(body, str) else json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

            def log_message(self, *args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self):
        return f"http://127.0.0.1:{self.server.server_port}/v1/chat/completions"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


def ok_body(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


FAST = ClientParams(max_retries=2, backoff_s=0.0, timeout_ms=5000)


def test_http_client_roundtrip(monkeypatch):
    monkeypatch.setenv("FCTN_TEST_KEY", "secret-value")
    with _Stub([(200, ok_body("stub payload"))]) as stub:
        reply = HttpChatClient(stub.url, "FCTN_TEST_KEY").send(conv("hello"), FAST)
    assert reply.role == "assistant" and reply.content == "stub payload"
    headers, body = stub.requests[0]
    assert set(body) == {"model", "messages", "max_tokens", "temperature"}
    assert body["max_tokens"] == 3000 and body["messages"][1] == {"role": "user", "content": "hello"}
    assert headers["Authorization"] == "Bearer secret-value"


def test_http_client_retries_transient():
    with _Stub([(503, "{}"), (429, "{}"), (200, ok_body("finally"))]) as stub:
        assert HttpChatClient(stub.url, None).send(conv("q"), FAST).content == "finally"
    assert len(stub.requests) == 3


def test_http_client_gives_up():
    with _Stub([(500, "{}")]) as stub:
        with pytest.raises(ClientUnavailable):
            HttpChatClient(stub.url, None).send(conv("q"), FAST)
    assert len(stub.requests) == 3


def test_http_client_hard_4xx():
    with _Stub([(401, "{}")]) as stub:
        with pytest.raises(ClientUnavailable):
            HttpChatClient(stub.url, None).send(conv("q"), FAST)
    assert len(stub.requests) == 1


@pytest.mark.parametrize("body", ["not json", {"choices": []}, {"choices": [{"message": {"content": ""}}]}])
def test_http_client_protocol_error(body):
    with _Stub([(200, body)]) as stub:
        with pytest.raises(ProtocolError):
            HttpChatClient(stub.url, None).send(conv("q"), FAST)


def test_http_client_unreachable():
    with pytest.raises(ClientUnavailable):
        HttpChatClient("http://127.0.0.1:9/none", None).send(conv("q"), ClientParams(max_retries=1, backoff_s=0.0, timeout_ms=500))
