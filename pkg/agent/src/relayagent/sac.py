"""Soft actor-critic with twin target critics and optional temperature tuning.

State/action/reward/next-state tuples only; episode ends are horizon cuts,
not terminal states, so targets always bootstrap.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch.optim import Adam

from .config import SacConfig
from .nets import GaussianActor, TwinCritic
from .replay import ReplayBuffer


class SacAgent:
    def __init__(self, config: SacConfig, seed: int = 0) -> None:
        self.config = config
        torch.manual_seed(seed)
        self.rng = np.random.default_rng(seed)

        self.actor = GaussianActor(
            config.obs_dim, config.action_dim, config.hidden_units, config.hidden_layers
        )
        self.critic = TwinCritic(
            config.obs_dim, config.action_dim, config.hidden_units, config.hidden_layers
        )
        self.critic_target = TwinCritic(
            config.obs_dim, config.action_dim, config.hidden_units, config.hidden_layers
        )
        self.critic_target.load_state_dict(self.critic.state_dict())
        for parameter in self.critic_target.parameters():
            parameter.requires_grad_(False)

        self.actor_opt = Adam(self.actor.parameters(), lr=config.learning_rate)
        self.critic_opt = Adam(self.critic.parameters(), lr=config.learning_rate)

        self.log_alpha = torch.tensor(float(np.log(config.temperature)), requires_grad=True)
        self.alpha_opt = Adam([self.log_alpha], lr=config.learning_rate)
        self.target_entropy = -float(config.action_dim)

        self.buffer = ReplayBuffer(config.replay_capacity, config.obs_dim, config.action_dim)
        self.updates_done = 0
        self.epochs_acted = 0

    @property
    def alpha(self) -> float:
        return float(self.log_alpha.detach().exp())

    # -- acting -------------------------------------------------------------

    def random_action(self) -> np.ndarray:
        return self.rng.uniform(-1.0, 1.0, size=self.config.action_dim)

    def act(self, obs, deterministic: bool = False) -> np.ndarray:
        tensor = torch.as_tensor(np.asarray(obs, dtype=np.float32)).unsqueeze(0)
        with torch.no_grad():
            if deterministic:
                action = self.actor.mean_action(tensor)
            else:
                action, _ = self.actor.sample(tensor)
        return action.squeeze(0).numpy()

    # -- learning -------------------------------------------------------------

    def observe(self, state, action, reward, next_state) -> None:
        self.buffer.push(state, action, reward * self.config.reward_scale, next_state)

    def update(self) -> dict | None:
        """One gradient step on critics, actor, and (optionally) temperature."""
        if len(self.buffer) < self.config.batch_size:
            return None
        states, actions, rewards, next_states = self.buffer.sample(
            self.config.batch_size, self.rng
        )
        states = torch.as_tensor(states)
        actions = torch.as_tensor(actions)
        rewards = torch.as_tensor(rewards).unsqueeze(-1)
        next_states = torch.as_tensor(next_states)
        alpha = self.log_alpha.exp().detach()

        with torch.no_grad():
            next_actions, next_log_prob = self.actor.sample(next_states)
            target_q1, target_q2 = self.critic_target(next_states, next_actions)
            soft_value = torch.min(target_q1, target_q2) - alpha * next_log_prob
            target = rewards + self.config.discount * soft_value

        q1, q2 = self.critic(states, actions)
        critic_loss = F.mse_loss(q1, target) + F.mse_loss(q2, target)
        self.critic_opt.zero_grad()
        critic_loss.backward()
        self.critic_opt.step()

        sampled, log_prob = self.actor.sample(states)
        q1_pi, q2_pi = self.critic(states, sampled)
        actor_loss = (alpha * log_prob - torch.min(q1_pi, q2_pi)).mean()
        self.actor_opt.zero_grad()
        actor_loss.backward()
        self.actor_opt.step()

        alpha_loss = torch.tensor(0.0)
        if self.config.autotune_temperature:
            alpha_loss = -(self.log_alpha * (log_prob + self.target_entropy).detach()).mean()
            self.alpha_opt.zero_grad()
            alpha_loss.backward()
            self.alpha_opt.step()

        self.updates_done += 1
        if self.updates_done % self.config.target_update_interval == 0:
            self._soft_update()

        return {
            "critic_loss": float(critic_loss.detach()),
            "actor_loss": float(actor_loss.detach()),
            "alpha_loss": float(alpha_loss.detach()),
            "alpha": self.alpha,
        }

    def _soft_update(self) -> None:
        tau = self.config.target_smoothing
        with torch.no_grad():
            for target, online in zip(self.critic_target.parameters(), self.critic.parameters()):
                target.mul_(1.0 - tau).add_(online, alpha=tau)

    # -- persistence -------------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "actor": self.actor.state_dict(),
            "critic": self.critic.state_dict(),
            "critic_target": self.critic_target.state_dict(),
            "actor_opt": self.actor_opt.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
            "alpha_opt": self.alpha_opt.state_dict(),
            "log_alpha": self.log_alpha.detach().clone(),
            "updates_done": self.updates_done,
            "epochs_acted": self.epochs_acted,
            "buffer": self.buffer.state_dict(),
            "torch_rng": torch.get_rng_state(),
            "numpy_rng": self.rng.bit_generator.state,
        }

    def load_state_dict(self, payload: dict) -> None:
        if payload["config"] != self.config.to_dict():
            raise ValueError("checkpoint was produced under a different configuration")
        self.actor.load_state_dict(payload["actor"])
        self.critic.load_state_dict(payload["critic"])
        self.critic_target.load_state_dict(payload["critic_target"])
        self.actor_opt.load_state_dict(payload["actor_opt"])
        self.critic_opt.load_state_dict(payload["critic_opt"])
        self.alpha_opt.load_state_dict(payload["alpha_opt"])
        with torch.no_grad():
            self.log_alpha.copy_(payload["log_alpha"])
        self.updates_done = payload["updates_done"]
        self.epochs_acted = payload["epochs_acted"]
        self.buffer.load_state_dict(payload["buffer"])
        torch.set_rng_state(payload["torch_rng"])
        self.rng.bit_generator.state = payload["numpy_rng"]

    def save(self, path) -> None:
        torch.save(self.state_dict(), path)

    @classmethod
    def load(cls, path, config: SacConfig | None = None) -> "SacAgent":
        payload = torch.load(path, weights_only=False)
        if config is None:
            config = SacConfig(**payload["config"])
        agent = cls(config)
        agent.load_state_dict(payload)
        return agent
