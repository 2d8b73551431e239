"""Actor and critic networks: plain ReLU MLPs, Gaussian policy with tanh squash."""

from __future__ import annotations

import torch
import torch.nn as nn

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
EPS = 1e-6


def mlp(in_dim: int, hidden_units: int, hidden_layers: int, out_dim: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    width = in_dim
    for _ in range(hidden_layers):
        layers += [nn.Linear(width, hidden_units), nn.ReLU()]
        width = hidden_units
    layers.append(nn.Linear(width, out_dim))
    return nn.Sequential(*layers)


class GaussianActor(nn.Module):
    def __init__(self, obs_dim: int, action_dim: int, hidden_units: int, hidden_layers: int):
        super().__init__()
        self.body = mlp(obs_dim, hidden_units, hidden_layers, 2 * action_dim)
        self.action_dim = action_dim

    def forward(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mean, log_std = self.body(obs).chunk(2, dim=-1)
        log_std = torch.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std

    def sample(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Reparameterized squashed sample and its log-density."""
        mean, log_std = self(obs)
        normal = torch.distributions.Normal(mean, log_std.exp())
        pre_squash = normal.rsample()
        action = torch.tanh(pre_squash)
        log_prob = normal.log_prob(pre_squash) - torch.log(1.0 - action.pow(2) + EPS)
        return action, log_prob.sum(dim=-1, keepdim=True)

    def mean_action(self, obs: torch.Tensor) -> torch.Tensor:
        mean, _ = self(obs)
        return torch.tanh(mean)


class TwinCritic(nn.Module):
    """Two independent Q heads; the minimum combats value overestimation."""

    def __init__(self, obs_dim: int, action_dim: int, hidden_units: int, hidden_layers: int):
        super().__init__()
        self.q1 = mlp(obs_dim + action_dim, hidden_units, hidden_layers, 1)
        self.q2 = mlp(obs_dim + action_dim, hidden_units, hidden_layers, 1)

    def forward(self, obs: torch.Tensor, action: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        pair = torch.cat([obs, action], dim=-1)
        return self.q1(pair), self.q2(pair)
