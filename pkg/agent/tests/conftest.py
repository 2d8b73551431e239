from collections import deque
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]
CONFIG_DIR = REPO_ROOT / "configs"


class FakeEnv:
    """In-process stand-in for the simulator's server side.

    Deterministic: observations depend only on the step index, the reward
    only on the action, with a single peak at (0.25, -0.25). Implements the
    same expect/send/close surface as the protocol connection.
    """

    def __init__(self, epochs: int = 30, penalty: float = 0.0):
        self.epochs = epochs
        self.sent_actions: list[tuple[float, float]] = []
        self.rewards_given: list[float] = []
        self._outbox = deque(
            [{"type": "hello", "version": 1, "config": {"reward_penalty": penalty}}]
        )
        self._step = 0
        self._fortune = 1000.0

    def _obs(self, step: int, reward: float, done: bool) -> dict:
        o = [((step * 31 + i * 7) % 97) / 97.0 for i in range(7)]
        return {
            "type": "obs",
            "step": step,
            "o": o,
            "r": reward,
            "done": done,
            "info": {"fortune": self._fortune, "lost_fees": 0.0, "failed_swaps": 0},
        }

    def send(self, message: dict) -> None:
        kind = message["type"]
        if kind == "reset":
            self._step = 0
            self._outbox.append(self._obs(0, 0.0, False))
        elif kind == "act":
            a = message["a"]
            self.sent_actions.append((a[0], a[1]))
            reward = 1.0 - (a[0] - 0.25) ** 2 - (a[1] + 0.25) ** 2
            self.rewards_given.append(reward)
            self._fortune += reward
            self._step += 1
            self._outbox.append(self._obs(self._step, reward, self._step >= self.epochs))

    def recv(self):
        return self._outbox.popleft() if self._outbox else None

    def expect(self, *types: str) -> dict:
        message = self.recv()
        assert message is not None, f"fake env has nothing to say while waiting for {types}"
        assert message["type"] in types, f"expected {types}, got {message['type']}"
        return message

    def close(self) -> None:
        pass
