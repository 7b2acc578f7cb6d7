import os
import shutil
import signal
import socket
import subprocess
import time

import pytest
import requests


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def cli_path():
    path = os.environ.get("PQ_CLI") or shutil.which("pathoquant")
    if not path:
        pytest.skip("pathoquant binary not available (set PQ_CLI)")
    return path


@pytest.fixture(scope="session")
def server(tmp_path_factory):
    """A `pathoquant serve` process on free loopback ports."""
    storage = tmp_path_factory.mktemp("storage")
    api_port, web_port = free_port(), free_port()
    proc = subprocess.Popen(
        [cli_path(), "serve", "--api-port", str(api_port), "--web-port", str(web_port),
         "--storage", str(storage), "--pool", "2"],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT)
    api = f"http://127.0.0.1:{api_port}"
    web = f"http://127.0.0.1:{web_port}"
    deadline = time.monotonic() + 15
    while True:
        try:
            if requests.get(api + "/api/health", timeout=1).status_code == 200:
                break
        except requests.ConnectionError:
            pass
        if proc.poll() is not None or time.monotonic() > deadline:
            proc.kill()
            pytest.fail("server did not start: " + proc.stdout.read().decode())
        time.sleep(0.05)
    yield {"api": api, "web": web, "storage": storage}
    proc.send_signal(signal.SIGTERM)
    assert proc.wait(timeout=40) == 0
