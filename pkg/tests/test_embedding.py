import json
import math

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reflectmem import HashingEmbedder, RemoteEmbedder, cosine_similarity, embed_text
from reflectmem.errors import DimensionMismatch, EmptyText, ProviderFailure, ZeroVector


def test_hashing_is_deterministic(embedder):
    a, b = embed_text(embedder, "abc"), embed_text(embedder, "abc")
    assert a.tobytes() == b.tobytes()
    assert HashingEmbedder().embed_one("abc").tobytes() == a.tobytes()


@given(st.text(min_size=1).filter(lambda s: any(c.isalnum() for c in s)))
def test_hashing_unit_norm(text):
    v = HashingEmbedder().embed_one(text)
    assert v.shape == (256,)
    assert abs(np.linalg.norm(v) - 1.0) < 1e-9


def test_hashing_lexical_similarity(embedder):
    # Bag-of-tokens oracle (no hashing): 4 shared of 6 tokens -> 2/3; 2 shared -> 1/3.
    q = embed_text(embedder, "Go to MAP, states near Chicago")
    near = embed_text(embedder, "Go to MAP, states bordering Illinois")
    far = embed_text(embedder, "Go to GITLAB, close my issue")
    assert cosine_similarity(q, near) == pytest.approx(2 / 3, abs=1e-12)
    assert cosine_similarity(q, far) == pytest.approx(1 / 3, abs=1e-12)
    assert cosine_similarity(q, near) > cosine_similarity(q, far)


@pytest.mark.parametrize("text", ["", "   ", "!!!"])
def test_empty_text(embedder, text):
    with pytest.raises(EmptyText):
        embed_text(embedder, text)


def test_cosine_examples():
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 2, 3], [4, 5, 6]) == pytest.approx(32 / (math.sqrt(14) * math.sqrt(77)), abs=1e-12)
    assert cosine_similarity([1, 2, 3], [4, 5, 6]) == pytest.approx(0.974631846, abs=1e-6)
    with pytest.raises(DimensionMismatch):
        cosine_similarity([1, 2], [1, 2, 3])
    with pytest.raises(ZeroVector):
        cosine_similarity([0, 0], [1, 2])


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vec = arrays(np.float64, 8, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)


@settings(max_examples=200)
@given(vec, vec, st.floats(1e-3, 1e3))
def test_cosine_properties(a, b, c):
    s = cosine_similarity(a, b)
    assert -1.0 <= s <= 1.0
    assert abs(s - cosine_similarity(b, a)) <= 1e-12
    assert abs(cosine_similarity(a, a) - 1.0) <= 1e-9
    assert abs(cosine_similarity(c * a, b) - s) <= 1e-9


def _embedding_server(dim=3, fail_times=0, status=503):
    calls = {"n": 0, "bodies": []}

    def handler(request: httpx.Request):
        calls["n"] += 1
        body = json.loads(request.content)
        calls["bodies"].append(body)
        calls["auth"] = request.headers.get("authorization")
        if calls["n"] <= fail_times:
            return httpx.Response(status, text="busy")
        data = [{"index": i, "embedding": [float(len(t)), 1.0, float(i)][:dim]} for i, t in enumerate(body["input"])]
        return httpx.Response(200, json={"data": list(reversed(data))})

    return calls, httpx.MockTransport(handler)


def test_remote_embedder_batches_and_orders(monkeypatch):
    monkeypatch.setenv("REFLECTMEM_EMBED_API_KEY", "sk-test")
    calls, transport = _embedding_server()
    emb = RemoteEmbedder("http://x/v1", "m", dim=3, batch_size=2, max_parallel=2, transport=transport)
    out = emb.embed(["a", "bb", "ccc"])
    assert [v[0] for v in out] == [1.0, 2.0, 3.0]
    assert calls["n"] == 2
    assert calls["bodies"][0]["model"] == "m"
    assert calls["auth"] == "Bearer sk-test"
    assert emb.name == "remote:m"


def test_remote_embedder_retries_then_succeeds():
    calls, transport = _embedding_server(fail_times=2)
    emb = RemoteEmbedder("http://x", "m", dim=3, backoff_s=0.0, transport=transport)
    assert embed_text(emb, "hi")[0] == 2.0
    assert calls["n"] == 3


def test_remote_embedder_gives_up_retriable():
    calls, transport = _embedding_server(fail_times=5)
    emb = RemoteEmbedder("http://x", "m", dim=3, backoff_s=0.0, transport=transport)
    with pytest.raises(ProviderFailure) as info:
        emb.embed(["hi"])
    assert info.value.retriable and calls["n"] == 3


def test_remote_embedder_non_retriable_status():
    calls, transport = _embedding_server(fail_times=5, status=401)
    emb = RemoteEmbedder("http://x", "m", dim=3, backoff_s=0.0, transport=transport)
    with pytest.raises(ProviderFailure) as info:
        emb.embed(["hi"])
    assert not info.value.retriable and calls["n"] == 1


def test_remote_embedder_transport_error_is_retriable():
    def handler(request):
        raise httpx.ConnectTimeout("timed out", request=request)

    emb = RemoteEmbedder("http://x", "m", dim=3, backoff_s=0.0, transport=httpx.MockTransport(handler))
    with pytest.raises(ProviderFailure) as info:
        emb.embed(["hi"])
    assert info.value.retriable


@pytest.mark.parametrize("payload", [{"nope": 1}, {"data": [{"embedding": [1.0]}]}, {"data": [{"embedding": [1, 2, float("nan")]}]}])
def test_remote_embedder_malformed(payload):
    transport = httpx.MockTransport(lambda r: httpx.Response(200, content=json.dumps(payload).encode()))
    emb = RemoteEmbedder("http://x", "m", dim=3, transport=transport)
    with pytest.raises(ProviderFailure) as info:
        emb.embed(["hi"])
    assert not info.value.retriable
