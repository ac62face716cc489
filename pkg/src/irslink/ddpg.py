"""DDPG agent that steers IRS phase shifts toward the co-phased optimum.

The environment holds one channel realization. A state is the phase vector,
an action adds a bounded phase increment to every element, and the reward is
``|H|`` at the new phases.

Network inputs are normalized: phases map to ``theta / pi - 1`` and actions to
``action / delta_max``. The actor ends in tanh, scaled by ``delta_max``.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, PhaseConfig, optimal_phases, wrap_phase
from .errors import ContractError, ParameterError
from .neural import AdamState, DenseNet


@dataclass
class TrainConfig:
    actor_lr: float = 1e-3
    critic_lr: float = 3e-3
    capacity: int = 10_000
    batch: int = 128
    n_episodes: int = 300
    n_steps: int = 200
    target_refresh: int = 90
    delta_max: float = math.radians(15.0)
    exploration_sigma: float = math.radians(3.0)
    sigma_decay: float = 0.995
    n_samples: int = 1
    tau: float | None = None
    discount: float = 0.9
    hidden: int = 64
    share_hidden: bool = False
    profile_inputs: bool = False
    warm_start: bool = True
    eval_steps: int = 15
    dtype: str = "float32"
    seed: int = 0

    def __post_init__(self):
        counts = ("capacity", "batch", "n_episodes", "n_steps", "target_refresh", "n_samples", "hidden")
        for name in counts:
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be a positive count")
        if not (self.actor_lr > 0 and self.critic_lr > 0):
            raise ParameterError("learning rates must be positive")
        if self.batch > self.capacity:
            raise ParameterError("batch cannot exceed replay capacity")
        if not 0 < self.delta_max < math.pi / 2:
            raise ParameterError("delta_max must lie in (0, pi/2)")
        if self.exploration_sigma < 0 or not 0 < self.sigma_decay <= 1:
            raise ParameterError("exploration sigma must be >= 0 and decay in (0, 1]")
        if self.tau is not None and not 0 < self.tau <= 1:
            raise ParameterError("tau must lie in (0, 1]")
        if not 0 <= self.discount < 1:
            raise ParameterError("discount must lie in [0, 1)")


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


class PhaseEnv:
    """Phase-control environment for one channel realization."""

    def __init__(self, realization: ChannelRealization, delta_max: float, max_steps: int):
        if realization.g.ndim != 1:
            raise ParameterError("environment needs a single realization")
        self.realization = realization
        self.cascade = realization.g * realization.g_prime
        self.optimum = float(np.sum(np.abs(self.cascade)))
        self.delta_max = delta_max
        self.max_steps = max_steps
        self.clip_events = 0
        self.reset(np.zeros(realization.size))

    @property
    def m(self) -> int:
        return self.cascade.size

    def reset(self, thetas) -> np.ndarray:
        self.state = wrap_phase(np.asarray(thetas, dtype=float))
        self.step_count = 0
        return self.state

    def gain(self, thetas) -> float:
        return float(abs(np.dot(self.cascade, np.exp(1j * thetas))))

    def step(self, action) -> tuple[np.ndarray, float]:
        """Apply a phase increment; returns the new phases and ``|H|``."""
        if self.step_count >= self.max_steps:
            raise ContractError("episode already reached its step limit")
        action = np.asarray(action, dtype=float)
        if action.shape != (self.m,):
            raise ParameterError(f"action must have shape ({self.m},)")
        if np.any(np.abs(action) > self.delta_max):
            self.clip_events += 1
            action = np.clip(action, -self.delta_max, self.delta_max)
        self.state = wrap_phase(self.state + action)
        self.step_count += 1
        return self.state, self.gain(self.state)


def env_step(env: PhaseEnv, action) -> tuple[np.ndarray, float]:
    return env.step(action)


class ReplayMemory:
    """Fixed-capacity FIFO ring of transitions stored as arrays."""

    def __init__(self, capacity: int, m: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, m))
        self.actions = np.zeros((capacity, m))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, m))
        self.cursor = 0
        self.size = 0

    @property
    def full(self) -> bool:
        return self.size == self.capacity

    def push(self, tr: Transition):
        i = self.cursor
        self.states[i] = tr.state
        self.actions[i] = tr.action
        self.rewards[i] = tr.reward
        self.next_states[i] = tr.next_state
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        if self.size < batch:
            raise ContractError(f"replay holds {self.size} transitions, batch needs {batch}")
        idx = rng.integers(0, self.size, batch)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]


def normalize_state(thetas):
    return np.asarray(thetas) / np.pi - 1.0


class Agent:
    """Evaluation and target actor-critic pairs with their optimizers."""

    def __init__(self, m: int, config: TrainConfig, rng: np.random.Generator, extra_inputs=None):
        self.m = m
        self.config = config
        self.extra = np.zeros(0) if extra_inputs is None else np.asarray(extra_inputs, dtype=float)
        n_in = m + self.extra.size
        h = config.hidden
        dtype = np.dtype(config.dtype)
        self.actor = DenseNet([n_in, h, h, m], ["tanh", "tanh", "tanh"], rng, dtype=dtype)
        self.critic = DenseNet([n_in + m, h, h, 1], ["tanh", "tanh", "linear"], rng, dtype=dtype)
        if config.share_hidden:
            # first hidden layer widths differ (state vs state+action); share
            # from the first common-width layer on
            self.critic.share_layer(self.actor, 1, 1)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        if config.share_hidden:
            self.critic_target.share_layer(self.actor_target, 1, 1)
        self.actor_opt = AdamState(config.actor_lr)
        self.critic_opt = AdamState(config.critic_lr)
        self.updates = 0

    def features(self, thetas) -> np.ndarray:
        s = normalize_state(thetas)
        if self.extra.size == 0:
            return s
        if s.ndim == 1:
            return np.concatenate([s, self.extra])
        return np.hstack([s, np.broadcast_to(self.extra, (s.shape[0], self.extra.size))])

    def act(self, thetas) -> np.ndarray:
        """Deterministic action in radians."""
        return self.config.delta_max * self.actor(self.features(thetas))


def select_action(agent: Agent, state, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Actor output plus N(0, sigma^2) noise per dimension, clipped to the action box."""
    if sigma < 0:
        raise ParameterError("exploration sigma must be non-negative")
    a = agent.act(state)
    if sigma > 0:
        a = a + rng.normal(0.0, sigma, a.shape)
    d = agent.config.delta_max
    return np.clip(a, -d, d)


def update_networks(agent: Agent, batch) -> tuple[float, float]:
    """One critic regression step and one deterministic policy-gradient step.

    Returns the critic's mean squared error and the actor's mean Q before the
    respective updates.
    """
    states, actions, rewards, next_states = batch
    cfg = agent.config
    n = rewards.shape[0]
    if n != cfg.batch:
        raise ContractError(f"batch of {n} does not match configured size {cfg.batch}")
    d = cfg.delta_max
    s = agent.features(states)
    s_next = agent.features(next_states)

    if cfg.discount > 0:
        a_next = agent.actor_target(s_next)
        q_next = agent.critic_target(np.hstack([s_next, a_next]))[:, 0]
        target = rewards + cfg.discount * q_next
    else:
        target = rewards

    q, cache = agent.critic.forward(np.hstack([s, actions / d]))
    err = q[:, 0] - target
    critic_loss = float(np.mean(err * err))
    grads, _ = agent.critic.backward(cache, (2.0 / n) * err[:, None], flat=True, input_grad=False)
    agent.critic.apply_adam(agent.critic_opt, grads)

    a_norm, actor_cache = agent.actor.forward(s)
    q_pi, critic_cache = agent.critic.forward(np.hstack([s, a_norm]))
    actor_objective = float(np.mean(q_pi))
    _, dq_dx = agent.critic.backward(critic_cache, np.full((n, 1), -1.0 / n), param_grads=False)
    grads, _ = agent.actor.backward(actor_cache, dq_dx[:, s.shape[1] :], flat=True, input_grad=False)
    agent.actor.apply_adam(agent.actor_opt, grads)
    if cfg.share_hidden:
        agent.critic.touch()

    agent.updates += 1
    if cfg.tau is not None:
        agent.actor_target.soft_update(agent.actor, cfg.tau)
        agent.critic_target.soft_update(agent.critic, cfg.tau)
    elif agent.updates % cfg.target_refresh == 0:
        agent.actor_target.copy_from(agent.actor)
        agent.critic_target.copy_from(agent.critic)
    return critic_loss, actor_objective


@dataclass
class TrainReport:
    final_rewards: np.ndarray
    optimal_gain: float
    runtime: float
    agent: Agent
    max_reward: float
    clip_events: int
    diverged: bool = False
    diagnostic: str = ""
    critic_losses: list = field(default_factory=list)

    @property
    def ratios(self) -> np.ndarray:
        return self.final_rewards / self.optimal_gain


def train(
    config: TrainConfig,
    realization: ChannelRealization,
    rng: np.random.Generator | None = None,
    agent: Agent | None = None,
    extra_inputs=None,
) -> TrainReport:
    """Run the episode loop on one realization.

    Episodes start from random phases until the replay memory is full, then
    from all-zero phases. While the memory fills, actions are drawn uniformly
    from the action box; afterwards they come from the actor plus Gaussian
    noise whose scale decays once per episode. One network update follows
    every environment step once the memory is full.
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    start = time.perf_counter()
    env = PhaseEnv(realization, config.delta_max, config.n_steps)
    m = env.m
    if agent is None:
        agent = Agent(m, config, rng, extra_inputs)
    memory = ReplayMemory(config.capacity, m)
    sigma = config.exploration_sigma
    final_rewards = np.zeros(config.n_episodes)
    max_reward = 0.0
    losses = []
    diverged = False
    diagnostic = ""
    d = config.delta_max
    for episode in range(config.n_episodes):
        if memory.full:
            state = env.reset(np.zeros(m))
        else:
            state = env.reset(rng.uniform(0.0, 2.0 * np.pi, m))
        reward = env.gain(state)
        for _ in range(config.n_steps):
            if memory.full:
                action = select_action(agent, state, sigma, rng)
            else:
                action = rng.uniform(-d, d, m)
            next_state, reward = env.step(action)
            max_reward = max(max_reward, reward)
            memory.push(Transition(state, action, reward, next_state))
            state = next_state
            if memory.full:
                loss, _ = update_networks(agent, memory.sample(config.batch, rng))
                if not math.isfinite(loss):
                    diverged = True
                    diagnostic = f"non-finite critic loss at episode {episode}"
                    break
        final_rewards[episode] = reward
        if diverged:
            final_rewards = final_rewards[: episode + 1]
            break
        if memory.full:
            sigma *= config.sigma_decay
            losses.append(loss)
    return TrainReport(
        final_rewards=final_rewards,
        optimal_gain=env.optimum,
        runtime=time.perf_counter() - start,
        agent=agent,
        max_reward=max_reward,
        clip_events=env.clip_events,
        diverged=diverged,
        diagnostic=diagnostic,
        critic_losses=losses,
    )


def rollout_gains(agent: Agent, realization: ChannelRealization, n_steps: int) -> np.ndarray:
    """Noiseless rollout from zero phases; gains at the start and after each step."""
    env = PhaseEnv(realization, agent.config.delta_max, n_steps)
    state = env.reset(np.zeros(env.m))
    gains = [env.gain(state)]
    for _ in range(n_steps):
        state, reward = env.step(np.clip(agent.act(state), -env.delta_max, env.delta_max))
        gains.append(reward)
    return np.array(gains)


def evaluate_policy(agent: Agent, realization: ChannelRealization, n_steps: int) -> float:
    """Best gain along a noiseless rollout, as a fraction of the aligned optimum."""
    _, optimum = optimal_phases(realization)
    if optimum == 0:
        return 1.0
    return float(np.max(rollout_gains(agent, realization, n_steps)) / optimum)


def greedy_alignment_action(state, target: PhaseConfig, delta_max: float) -> np.ndarray:
    """Largest step toward ``target`` along the shorter arc, within the action box."""
    diff = np.mod(target.thetas - np.asarray(state) + np.pi, 2.0 * np.pi) - np.pi
    return np.clip(diff, -delta_max, delta_max)
