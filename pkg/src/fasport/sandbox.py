"""Host side of the guest-heuristic sandbox protocol.

The worker is a separate process (any language) speaking newline-delimited
JSON over its stdin/stdout:

    host -> worker  init {version, task, limits, channel_path, K, n, N,
                          P_mw, noise_mw, B}
    host -> worker  run {source}
    worker -> host  eval {realization, ports}
    host -> worker  eval_result {value} | {error}
    worker -> host  done {fitness, per_instance, eval_calls}
                    | fail {status, message}

Every SINR evaluation is answered by the host's solver, so there is a
single implementation of record. The host enforces the wall timeout
(killing the worker) and the eval-call budget (budget exhaustion is a
timeout-equivalent failure).
"""

import json
import queue
import subprocess
import threading
import time

from .balancing import Evaluator
from .errors import ConfigError, SandboxError
from .eoh import FitnessReport

PROTOCOL_VERSION = 1
VALID_FAIL_STATUSES = ("runtime_error", "timeout", "invalid_output")


def default_max_eval_calls(num_ports: int, selected_n: int, batch_size: int) -> int:
    # Covers the GRASP worst case (N*n evaluations per start) with headroom.
    return 20 * num_ports * selected_n * batch_size


class SandboxRunner:
    """Runs guest source in a worker process and scores it."""

    def __init__(self, worker_cmd, channel_path, batch, wall_timeout_s: float = 60.0,
                 max_eval_calls: int | None = None, record_transcript: bool = False):
        self.worker_cmd = list(worker_cmd)
        self.channel_path = str(channel_path)
        self.evaluator = Evaluator(batch)
        self.wall_timeout_s = wall_timeout_s
        scen = batch.scenario
        self.max_eval_calls = max_eval_calls if max_eval_calls is not None else \
            default_max_eval_calls(batch.num_ports, scen.selected_n, batch.batch_size)
        self.record_transcript = record_transcript
        self.last_session: dict = {}

    def _init_message(self, task: str) -> dict:
        batch = self.evaluator.batch
        scen = batch.scenario
        return {
            "kind": "init",
            "version": PROTOCOL_VERSION,
            "task": task,
            "limits": {"wall_timeout_s": self.wall_timeout_s,
                       "max_eval_calls": self.max_eval_calls},
            "channel_path": self.channel_path,
            "K": scen.users_k,
            "n": scen.selected_n,
            "N": batch.num_ports,
            "P_mw": scen.power_mw,
            "noise_mw": scen.noise_mw,
            "B": batch.batch_size,
        }

    def run(self, guest_source: str, task: str) -> FitnessReport:
        """One full protocol session; never raises for guest misbehaviour."""
        start = time.perf_counter()
        transcript: list = []
        session = {"host_eval_calls": 0, "worker_eval_calls": None,
                   "exit_code": None, "transcript": transcript}
        self.last_session = session
        try:
            proc = subprocess.Popen(
                self.worker_cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as exc:
            raise SandboxError(f"cannot start worker {self.worker_cmd}: {exc}") from exc

        lines: queue.Queue = queue.Queue()

        def pump():
            for line in proc.stdout:
                lines.put(line)
            lines.put(None)

        reader = threading.Thread(target=pump, daemon=True)
        reader.start()
        deadline = time.monotonic() + self.wall_timeout_s
        forced_status = None
        outcome = None

        def send(msg: dict):
            payload = json.dumps(msg)
            if self.record_transcript:
                transcript.append(("host", payload))
            try:
                proc.stdin.write(payload + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass

        def fail(status, detail):
            return FitnessReport(mean_min_sinr=float("-inf"), per_instance=[],
                                 wall_time_s=time.perf_counter() - start,
                                 status=status, detail=detail)

        send(self._init_message(task))
        send({"kind": "run", "source": guest_source})
        try:
            while outcome is None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    outcome = fail("timeout",
                                   f"wall timeout of {self.wall_timeout_s}s exceeded")
                    break
                try:
                    line = lines.get(timeout=remaining)
                except queue.Empty:
                    outcome = fail("timeout",
                                   f"wall timeout of {self.wall_timeout_s}s exceeded")
                    break
                if line is None:
                    outcome = fail("runtime_error", "worker exited before done/fail")
                    break
                line = line.strip()
                if not line:
                    continue
                if self.record_transcript:
                    transcript.append(("worker", line))
                try:
                    msg = json.loads(line)
                    kind = msg.get("kind")
                except (json.JSONDecodeError, AttributeError):
                    outcome = fail("runtime_error", f"malformed protocol line: {line[:200]}")
                    break
                if kind == "eval":
                    self._handle_eval(msg, session, send)
                    if session["host_eval_calls"] > self.max_eval_calls:
                        forced_status = "timeout"
                elif kind == "done":
                    outcome = self._handle_done(msg, session, start)
                elif kind == "fail":
                    status = msg.get("status")
                    if status not in VALID_FAIL_STATUSES:
                        status = "runtime_error"
                    outcome = fail(status, str(msg.get("message", "")))
                else:
                    outcome = fail("runtime_error", f"unknown message kind {kind!r}")
                    break
        finally:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                try:
                    proc.wait(timeout=5.0)
                except subprocess.TimeoutExpired:
                    pass
            session["exit_code"] = proc.returncode
        if forced_status is not None:
            outcome = FitnessReport(mean_min_sinr=float("-inf"), per_instance=[],
                                    wall_time_s=outcome.wall_time_s,
                                    status=forced_status,
                                    detail="eval-call budget exceeded")
        return outcome

    def _handle_eval(self, msg, session, send):
        session["host_eval_calls"] += 1
        if session["host_eval_calls"] > self.max_eval_calls:
            send({"kind": "eval_result", "error": "eval-call budget exceeded"})
            return
        try:
            realization = msg["realization"]
            ports = msg["ports"]
            if not isinstance(realization, int) or not isinstance(ports, list):
                raise ConfigError("eval needs integer realization and a port list")
            value = self.evaluator.evaluate_selection(realization, ports)
        except (ConfigError, KeyError, TypeError, ValueError) as exc:
            send({"kind": "eval_result", "error": str(exc)})
            return
        send({"kind": "eval_result", "value": value})

    def _handle_done(self, msg, session, start) -> FitnessReport:
        elapsed = time.perf_counter() - start
        try:
            fitness = float(msg["fitness"])
            per_instance = [float(v) for v in msg["per_instance"]]
            session["worker_eval_calls"] = int(msg["eval_calls"])
        except (KeyError, TypeError, ValueError):
            return FitnessReport(mean_min_sinr=float("-inf"), per_instance=[],
                                 wall_time_s=elapsed, status="runtime_error",
                                 detail="malformed done message")
        return FitnessReport(mean_min_sinr=fitness, per_instance=per_instance,
                             wall_time_s=elapsed, status="ok")
