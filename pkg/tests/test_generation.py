import base64
import json
import threading

import httpx
import numpy as np
import pytest

from previz.generation import (
    DEFAULT_HEIGHT,
    DEFAULT_WIDTH,
    BackendError,
    BackendTimeout,
    GenerationRequest,
    HttpBackend,
    MockBackend,
    decode_png,
    encode_png,
    generate,
    health_check,
    mock_render,
    prompt_tokens,
)


def make_request(**overrides) -> GenerationRequest:
    data = {
        "request_id": "req-1",
        "base_image_uri": "catalog/m01/s01.png",
        "prompt": "(beach:3.00), (noon:3.00), (left:2.00)",
        "user_prompt": None,
        "seed": 7,
        "width": 128,
        "height": 64,
    }
    data.update(overrides)
    return GenerationRequest(**data)


def test_request_defaults_and_validation():
    request = GenerationRequest(request_id="r", base_image_uri="x", prompt="p")
    assert (request.width, request.height) == (DEFAULT_WIDTH, DEFAULT_HEIGHT)
    with pytest.raises(ValueError):
        GenerationRequest(request_id="", base_image_uri="x", prompt="p")
    with pytest.raises(ValueError):
        GenerationRequest(request_id="r", base_image_uri="x", prompt="p", seed=-1)
    with pytest.raises(ValueError):
        GenerationRequest(request_id="r", base_image_uri="x", prompt="p", seed=2**64)
    with pytest.raises(ValueError):
        GenerationRequest(request_id="r", base_image_uri="x", prompt="p", width=0)


def test_request_dict_round_trip():
    request = make_request(user_prompt="warmer")
    assert GenerationRequest.from_dict(request.to_dict()) == request


def test_prompt_tokens():
    assert prompt_tokens("(beach:3.00), (tired eyes:1.50)") == ["beach", "tired eyes"]
    assert prompt_tokens("no weighted terms") == []


def test_mock_render_is_pure():
    request = make_request()
    assert np.array_equal(mock_render(request), mock_render(request))
    assert encode_png(mock_render(request)) == encode_png(mock_render(request))


def test_mock_render_request_id_does_not_matter():
    a = mock_render(make_request(request_id="one"))
    b = mock_render(make_request(request_id="two"))
    assert np.array_equal(a, b)


def test_mock_render_seed_and_prompt_sensitivity():
    base = mock_render(make_request())
    assert not np.array_equal(base, mock_render(make_request(seed=8)))
    assert not np.array_equal(
        base, mock_render(make_request(prompt="(office:3.00), (noon:3.00)"))
    )
    assert not np.array_equal(base, mock_render(make_request(user_prompt="warmer")))
    assert not np.array_equal(base, mock_render(make_request(base_image_uri="other.png")))


def test_mock_render_resolution():
    pixels = mock_render(make_request(width=200, height=100))
    assert pixels.shape == (100, 200, 3)
    assert pixels.dtype == np.uint8


def interior_mean(pixels: np.ndarray) -> float:
    # skip the top glyph strip so the fill level is measured cleanly
    return float(pixels[20:, :, :].mean()) / 255.0


def test_mock_render_luminance_bands():
    means = {}
    for time_token in ("noon", "sunrise_sunset", "night", None):
        parts = ["(beach:3.00)"]
        if time_token:
            parts.append(f"({time_token}:3.00)")
        pixels = mock_render(make_request(prompt=", ".join(parts), height=128))
        means[time_token] = interior_mean(pixels)
    # documented bands: noon 0.8, sunrise_sunset 0.55, absent 0.5, night 0.25
    assert means["noon"] > means["sunrise_sunset"] > means[None] > means["night"]
    for token, band in (("noon", 0.8), ("sunrise_sunset", 0.55), ("night", 0.25)):
        assert means[token] / means[None] == pytest.approx(band / 0.5, rel=0.02)


def test_mock_render_gradient_direction():
    left = mock_render(make_request(prompt="(beach:3.00), (left:2.00)", height=128))
    right = mock_render(make_request(prompt="(beach:3.00), (right:2.00)", height=128))
    flat = mock_render(make_request(prompt="(beach:3.00)", height=128))
    half = left.shape[1] // 2

    def halves(pixels):
        body = pixels[20:, :, :].astype(np.float64)
        return body[:, :half].mean(), body[:, half:].mean()

    l_left, l_right = halves(left)
    r_left, r_right = halves(right)
    f_left, f_right = halves(flat)
    assert l_left > l_right
    assert r_right > r_left
    assert f_left == pytest.approx(f_right, rel=1e-6)


def test_png_round_trip_exact():
    pixels = mock_render(make_request())
    assert np.array_equal(decode_png(encode_png(pixels)), pixels)


def test_mock_backend_contract():
    backend = MockBackend()
    request = make_request()
    result = backend.generate(request)
    assert result.request_id == request.request_id
    assert result.format == "png"
    assert result.backend == "mock"
    assert decode_png(result.image_bytes).shape == (request.height, request.width, 3)
    assert generate(request, backend).image_bytes == result.image_bytes
    status = backend.health()
    assert status.reachable and status.version == "mock"


class ScriptedHandler:
    """httpx.MockTransport handler driven by a list of canned behaviors."""

    def __init__(self, plan):
        self.plan = list(plan)
        self.calls = 0

    def __call__(self, request: httpx.Request) -> httpx.Response:
        step = self.plan[min(self.calls, len(self.plan) - 1)]
        self.calls += 1
        return step(request)


def ok_response(request: httpx.Request) -> httpx.Response:
    payload = json.loads(request.content)
    gen = GenerationRequest.from_dict(payload)
    data = encode_png(mock_render(gen))
    return httpx.Response(
        200,
        json={
            "request_id": gen.request_id,
            "image_base64": base64.b64encode(data).decode("ascii"),
            "format": "png",
        },
    )


def backend_with(handler) -> HttpBackend:
    return HttpBackend(
        "http://backend.test",
        transport=httpx.MockTransport(handler),
        retry_delay=0.0,
    )


def test_http_backend_success_matches_mock():
    backend = backend_with(ok_response)
    request = make_request()
    result = backend.generate(request)
    assert result.backend == "http"
    assert result.image_bytes == MockBackend().generate(request).image_bytes


def test_http_backend_retries_5xx_then_succeeds():
    handler = ScriptedHandler(
        [lambda r: httpx.Response(500, text="boom"), lambda r: httpx.Response(503, text="busy"), ok_response]
    )
    backend = backend_with(handler)
    result = backend.generate(make_request())
    assert handler.calls == 3
    assert result.request_id == "req-1"


def test_http_backend_gives_up_after_retries():
    handler = ScriptedHandler([lambda r: httpx.Response(500, text="boom")])
    backend = backend_with(handler)
    with pytest.raises(BackendError) as err:
        backend.generate(make_request())
    assert handler.calls == 3  # initial try + 2 retries
    assert err.value.status == 500


def test_http_backend_4xx_fails_without_retry():
    handler = ScriptedHandler([lambda r: httpx.Response(422, text="bad payload")])
    backend = backend_with(handler)
    with pytest.raises(BackendError) as err:
        backend.generate(make_request())
    assert handler.calls == 1
    assert err.value.status == 422


def test_http_backend_rejects_request_id_mismatch():
    def wrong_id(request):
        response = ok_response(request)
        payload = json.loads(response.content)
        payload["request_id"] = "someone-else"
        return httpx.Response(200, json=payload)

    with pytest.raises(BackendError) as err:
        backend_with(wrong_id).generate(make_request())
    assert "request_id mismatch" in str(err.value)


def test_http_backend_enforces_resolution_contract():
    def wrong_size(request):
        payload = json.loads(request.content)
        shrunk = GenerationRequest.from_dict({**payload, "width": 32, "height": 16})
        data = encode_png(mock_render(shrunk))
        return httpx.Response(
            200,
            json={
                "request_id": payload["request_id"],
                "image_base64": base64.b64encode(data).decode("ascii"),
                "format": "png",
            },
        )

    with pytest.raises(BackendError) as err:
        backend_with(wrong_size).generate(make_request())
    assert "resolution contract" in str(err.value)


def test_http_backend_timeout():
    def timeout(request):
        raise httpx.ReadTimeout("too slow")

    with pytest.raises(BackendTimeout):
        backend_with(timeout).generate(make_request())


def test_http_backend_transport_error():
    def refused(request):
        raise httpx.ConnectError("connection refused")

    with pytest.raises(BackendError):
        backend_with(refused).generate(make_request())


def test_http_backend_health_paths():
    healthy = backend_with(lambda r: httpx.Response(200, json={"status": "ok", "version": "9"}))
    status = healthy.health()
    assert status.reachable and status.version == "9"

    sick = backend_with(lambda r: httpx.Response(500, text="down"))
    assert not sick.health().reachable

    def refused(request):
        raise httpx.ConnectError("no route")

    assert not backend_with(refused).health().reachable


def test_health_check_never_raises():
    class Exploding:
        def health(self):
            raise RuntimeError("wires crossed")

    status = health_check(Exploding())
    assert not status.reachable
    assert "wires crossed" in status.detail


def test_stub_server_wire_contract():
    import uvicorn

    from previz.stub_server import create_stub_app

    config = uvicorn.Config(create_stub_app(), host="127.0.0.1", port=8199, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = 50
        backend = HttpBackend("http://127.0.0.1:8199", timeout=5.0, retry_delay=0.0)
        for _ in range(deadline):
            if backend.health().reachable:
                break
            import time

            time.sleep(0.1)
        else:
            pytest.fail("stub server did not come up")
        request = make_request()
        result = backend.generate(request)
        assert result.image_bytes == MockBackend().generate(request).image_bytes
        bad = httpx.post(
            "http://127.0.0.1:8199/generate", json={"request_id": "x"}, timeout=5.0
        )
        assert bad.status_code == 422
    finally:
        server.should_exit = True
        thread.join(timeout=5)
