"""
Talking to a generation endpoint over HTTP
==========================================

Real deployments put the frozen executor behind an inference server.
The remote executor POSTs the rendered prompt and expects a JSON body
with a ``generations`` list; transient failures (5xx, 429, malformed
bodies) retry with exponential backoff, and exhausted retries degrade
to failed rollouts instead of exceptions.  This demo runs one against a
loopback server whose first response is a deliberate 500.
"""

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from seamforge import ExecutorConfig, RemoteExecutor, parse_experience
from seamforge import toybench

logging.basicConfig(level=logging.WARNING, format="[log] %(message)s")

# ---------------------------------------------------------------------------
# A tiny inference server: fails once, then answers every prompt with 42.

FAILURES = [500]


class SolverHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        if FAILURES:
            self.send_response(FAILURES.pop())
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        payload = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        generations = ["<think>rule</think><answer>42</answer>"] * payload["n"]
        body = json.dumps({"generations": generations}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):  # keep the demo output clean
        pass


server = ThreadingHTTPServer(("127.0.0.1", 0), SolverHandler)
threading.Thread(target=server.serve_forever, daemon=True).start()
endpoint = f"http://127.0.0.1:{server.server_address[1]}/generate"
print("serving on", endpoint)

# ---------------------------------------------------------------------------
# The executor is configured like any other; kind="remote" plus endpoint.

backoffs = []
config = ExecutorConfig(
    kind="remote", endpoint=endpoint, retries=3, rollouts_per_candidate=3
)
executor = RemoteExecutor(config, sleep=backoffs.append, backoff_base_s=0.25)

instance = toybench.toy_dataset(1)[0]
entry = parse_experience(
    toybench.ANALYSIS_FRAGMENT
    + toybench.KEYWORD_EXPERIENCE_FRAGMENT
    + toybench.EXAMPLE_FRAGMENT
)

rollouts = executor.solve(instance, entry)
print(f"\n{len(rollouts)} rollouts from one request:")
for rollout in rollouts:
    print(f"  answer={rollout.extracted_answer!r} error={rollout.error}")
print("backoff sleeps after the injected 500:", backoffs)

server.shutdown()
server.server_close()

# ---------------------------------------------------------------------------
# With the server gone, retries exhaust and the failure is data, not an
# exception: downstream reward code sees zero-reward rollouts.

dead = RemoteExecutor(
    ExecutorConfig(kind="remote", endpoint=endpoint, retries=1),
    sleep=lambda _s: None,
)
failed = dead.solve(instance, entry)[0]
print("\nafter shutdown: answer =", failed.extracted_answer)
print("error:", failed.error.split(" (Caused by")[0])
