"""Multi-agent learner for joint offloading-mode and block selection.

Each VUE is an agent with a deterministic actor emitting continuous
logits; execution discretizes them (argmax mode, thresholded block bits)
while training differentiates through the continuous vector. Critics are
centralized: a state-action embedding per agent, softmax attention over
the other agents, and a per-agent Q head. Rewards are shared (fully
cooperative), with a penalty per deadline-violating VUE.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import allocation as alc
from .allocation import Allocation, arbitrate_block_conflicts, node_budgets
from .config import ExperimentConfig
from .cpufreq import FreqProblem, InfeasibleCapsError, allocate_frequencies
from .matching import swap_matching
from .neural import Adam, AttentionBlock, DenseNet, forward_stack, soft_update
from .radio import CLOUD, nearest_rrhs, sample_channels, uplink_rate
from .seeding import stream
from .world import World


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------

@dataclass
class StepMetrics:
    """Everything one environment step reports."""

    reward: float
    sum_satisfaction: float
    satisfaction: np.ndarray      # (K,)
    tau_comm: np.ndarray          # (K,) seconds
    tau_comp: np.ndarray
    tau: np.ndarray
    modes: np.ndarray             # (K,) node index
    rb: np.ndarray                # (K,) RB index or -1
    blocks_selected: np.ndarray   # (K,)
    deadline_violations: np.ndarray  # (K,) bool, includes unscheduled VUEs
    unscheduled: np.ndarray       # (K,) bool
    matching_iterations: int
    violation_counts: dict[str, int]


class Environment:
    """World + radio + allocation pipeline behind a step interface.

    All randomness is keyed by (root seed, purpose, episode); re-running
    an episode re-creates the identical draw sequence.
    """

    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        self.scen = cfg.scenario
        self.rcfg = cfg.radio
        self.weights = cfg.weights
        self.world: World | None = None
        self.episode = -1
        self.t = 0
        self._num_slots = None
        self._lag_values = None
        self._lag_counts = None
        self._lag_rsat = 0.0

    # -- dimensions ---------------------------------------------------

    @property
    def num_agents(self) -> int:
        return self.scen.num_vues

    @property
    def num_modes(self) -> int:
        return self.scen.num_faps + 1

    @property
    def num_slots(self) -> int:
        if self._num_slots is None:
            half = int(self.scen.sensing_radius_m / self.scen.block_spacing_m + 0.5)
            self._num_slots = 2 * half + 1
        return self._num_slots

    @property
    def obs_dim(self) -> int:
        return 3 + self.num_slots + self.num_modes + 1

    @property
    def act_dim(self) -> int:
        return self.num_modes + self.num_slots

    # -- episode control ----------------------------------------------

    def reset(self, episode: int) -> np.ndarray:
        self.episode = episode
        self.t = 0
        self.world = World.generate(self.scen, stream(self.cfg.seed, "world", episode))
        self._chan_rng = stream(self.cfg.seed, "channels", episode)
        self._value_rng = stream(self.cfg.seed, "values", episode)
        K = self.num_agents
        self._lag_values = np.zeros((K, self.scen.num_blocks))
        self._lag_counts = np.zeros(self.num_modes)
        self._lag_rsat = 0.0
        return self.observations()

    def observations(self) -> np.ndarray:
        """Per-agent observation vectors; lagged fields are zero at t=0."""
        K = self.num_agents
        out = np.zeros((K, self.obs_dim))
        for k in range(K):
            vue = self.world.vues[k]
            window = self.world.sensing_window(k)
            q = np.where(window >= 0, self._lag_values[k, np.clip(window, 0, None)], 0.0)
            out[k, 0] = vue.tau_max_s / self.scen.tau_max_max_s
            out[k, 1] = vue.position[0] / self.scen.road_length_m
            out[k, 2] = vue.position[1] / self.scen.road_length_m
            out[k, 3:3 + self.num_slots] = q
            off = 3 + self.num_slots
            out[k, off:off + self.num_modes] = self._lag_counts / K
            out[k, -1] = self._lag_rsat
        return out

    def decode_actions(self, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Continuous logits -> (mode per agent, proposed block selection)."""
        K = self.num_agents
        modes = np.argmax(actions[:, :self.num_modes], axis=1)
        proposed = np.zeros((K, self.scen.num_blocks), dtype=np.int8)
        for k in range(K):
            window = self.world.sensing_window(k)
            logits = actions[k, self.num_modes:]
            for slot, block in enumerate(window):
                if block >= 0 and logits[slot] > 0.0:
                    proposed[k, block] = 1
        return modes, proposed

    def encode_decisions(self, modes: np.ndarray, proposed: np.ndarray) -> np.ndarray:
        """Discrete decisions -> the equivalent +/-1 logit vectors."""
        K = self.num_agents
        actions = -np.ones((K, self.act_dim))
        for k in range(K):
            actions[k, modes[k]] = 1.0
            window = self.world.sensing_window(k)
            for slot, block in enumerate(window):
                if block >= 0 and proposed[k, block]:
                    actions[k, self.num_modes + slot] = 1.0
        return actions

    def step(self, actions: np.ndarray) -> tuple[float, np.ndarray, StepMetrics]:
        """Run one decision round and advance the world."""
        world = self.world
        scen, rcfg, weights = self.scen, self.rcfg, self.weights
        K = self.num_agents
        modes, proposed = self.decode_actions(actions)

        alloc = Allocation.empty(K, self.num_modes, scen.num_blocks, rcfg.num_rbs)
        alloc.mode[np.arange(K), modes] = 1
        alloc.blocks = arbitrate_block_conflicts(proposed, world)

        channels = sample_channels(world, rcfg, self.t, self._chan_rng)
        rrh_sets = [nearest_rrhs(k, world, rcfg.rrh_cluster_size) for k in range(K)]
        matching_iters = 0
        unscheduled = np.zeros(K, dtype=bool)
        for node in range(self.num_modes):
            matching, iters = swap_matching(node, alloc, channels, world, rcfg,
                                            rrh_sets=rrh_sets)
            matching_iters += iters
            for k in matching.unmatched:
                unscheduled[k] = True
        # VUEs that could not get an RB upload nothing this step.
        alloc.blocks[unscheduled, :] = 0

        powers = np.array([v.power_w for v in world.vues])
        rates = np.array([uplink_rate(k, alloc.mode_of(k), alloc.rbs, channels,
                                      powers, rcfg, world, rrh_ids=rrh_sets[k])
                          for k in range(K)])

        tau_comm = np.zeros(K)
        for node in range(self.num_modes):
            members = alc.cluster_of(node, alloc)
            if members:
                lat = alc.comm_latency(members, alloc, rates, rcfg, scen.block_bits)
                tau_comm[members] = lat

        loads = np.array([alc.comp_load_cycles(k, alloc, world) for k in range(K)])
        budgets = node_budgets(world)
        sojourns = np.array([alc.sojourn_cap(k, alloc, world) for k in range(K)])
        tau_caps = np.minimum([v.tau_max_s for v in world.vues], sojourns)
        for node in range(self.num_modes):
            members = alc.cluster_of(node, alloc)
            if not members:
                continue
            alloc.freqs[members] = self._node_frequencies(
                loads[members], budgets[node],
                tau_caps[members] - tau_comm[members])

        tau_comp = np.array([alc.comp_latency(k, alloc, world) for k in range(K)])
        tau = tau_comm + tau_comp

        violations = alc.check_constraints(alloc, world, tau, budgets)
        deadline_bad = np.zeros(K, dtype=bool)
        for v in violations:
            if v.constraint == "latency":
                deadline_bad[v.subject] = True
        deadline_bad |= unscheduled

        tau_max = np.array([v.tau_max_s for v in world.vues])
        sat = np.array([alc.satisfaction(k, alloc, world, tau[k], weights, tau_max[k])
                        for k in range(K)])
        sum_sat = float(sat.sum())
        penalty = weights.penalty_scale * weights.latency_weight * float(
            tau_max[deadline_bad].sum())
        reward = sum_sat - penalty

        counts = {c: 0 for c in ("latency", "block-overlap", "mode", "rb", "freq-budget")}
        for v in violations:
            counts[v.constraint] += 1
        counts["latency"] = int(deadline_bad.sum())

        metrics = StepMetrics(
            reward=reward, sum_satisfaction=sum_sat, satisfaction=sat,
            tau_comm=tau_comm, tau_comp=tau_comp, tau=tau, modes=modes,
            rb=np.array([alloc.rb_of(k) for k in range(K)]),
            blocks_selected=alloc.blocks.sum(axis=1).astype(int),
            deadline_violations=deadline_bad, unscheduled=unscheduled,
            matching_iterations=matching_iters, violation_counts=counts)

        # advance the world; lagged observation fields describe this step
        self._lag_values = world.chain.values()
        self._lag_counts = alloc.mode.sum(axis=0).astype(float)
        self._lag_rsat = 1.0 - float(deadline_bad.sum()) / K
        world.chain.step(self._value_rng)
        world.advance_mobility(scen.step_duration_s)
        self.t += 1
        return reward, self.observations(), metrics

    def _node_frequencies(self, loads: np.ndarray, budget: float,
                          residual_caps: np.ndarray) -> np.ndarray:
        """Cap-respecting split when feasible, plain square-root rule if not."""
        if np.all(loads == 0):
            return np.zeros(len(loads))
        loaded = loads > 0
        if np.all(residual_caps[loaded] > 0):
            try:
                caps = np.where(loaded, residual_caps, np.inf)
                return allocate_frequencies(FreqProblem(loads, budget, caps=caps))
            except InfeasibleCapsError:
                pass
        return allocate_frequencies(FreqProblem(loads, budget))


# ---------------------------------------------------------------------------
# scripted policies
# ---------------------------------------------------------------------------

def distance_full_policy(env: Environment) -> np.ndarray:
    """Nearest covering F-AP (cloud if none or if an RRH is closer),
    uploading every sensed block."""
    world = env.world
    K = env.num_agents
    modes = np.zeros(K, dtype=int)
    proposed = np.zeros((K, env.scen.num_blocks), dtype=np.int8)
    for k in range(K):
        vue = world.vues[k]
        best_fap, best_d = -1, np.inf
        for n, fap in enumerate(world.faps):
            d = float(np.linalg.norm(vue.position - fap.position))
            if d <= fap.coverage_radius_m and d < best_d:
                best_fap, best_d = n, d
        rrh_d = min(float(np.linalg.norm(vue.position - r.position))
                    for r in world.rrhs)
        if best_fap >= 0 and best_d <= rrh_d:
            modes[k] = best_fap + 1
        else:
            modes[k] = CLOUD
        proposed[k, world.sensed_blocks(k)] = 1
    return env.encode_decisions(modes, proposed)


def random_policy(env: Environment, rng: np.random.Generator) -> np.ndarray:
    """Uniform mode choice and fair-coin block selection."""
    K = env.num_agents
    modes = rng.integers(0, env.num_modes, size=K)
    proposed = np.zeros((K, env.scen.num_blocks), dtype=np.int8)
    for k in range(K):
        sensed = env.world.sensed_blocks(k)
        picks = rng.random(len(sensed)) < 0.5
        proposed[k, sensed[picks]] = 1
    return env.encode_decisions(modes, proposed)


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

class ReplayBuffer:
    """Ring buffer of joint transitions, oldest overwritten first."""

    def __init__(self, capacity: int, num_agents: int, obs_dim: int, act_dim: int,
                 store_next_actions: bool = False):
        self.capacity = capacity
        self.obs = np.zeros((capacity, num_agents, obs_dim))
        self.act = np.zeros((capacity, num_agents, act_dim))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, num_agents, obs_dim))
        self.next_act = (np.zeros((capacity, num_agents, act_dim))
                         if store_next_actions else None)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, act, rew, next_obs, next_act=None) -> None:
        i = self.cursor
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        if self.next_act is not None:
            self.next_act[i] = next_act
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        idx = rng.integers(0, self.size, size=batch)
        out = {"obs": self.obs[idx], "act": self.act[idx], "rew": self.rew[idx],
               "next_obs": self.next_obs[idx]}
        if self.next_act is not None:
            out["next_act"] = self.next_act[idx]
        return out


# ---------------------------------------------------------------------------
# critic
# ---------------------------------------------------------------------------

class CriticNet:
    """Embedding net(s) + attention + per-agent Q heads."""

    def __init__(self, num_agents: int, obs_dim: int, act_dim: int, cfg,
                 rng: np.random.Generator | None):
        self.num_agents = num_agents
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.shared = cfg.shared_embeddings
        in_dim = obs_dim + act_dim
        embed_sizes = [in_dim, *cfg.embed_hidden, cfg.embed_dim]
        embed_acts = ["relu"] * len(cfg.embed_hidden) + ["linear"]
        if self.shared:
            self.embeds = [DenseNet(embed_sizes, embed_acts, rng)]
        else:
            self.embeds = [DenseNet(embed_sizes, embed_acts, rng)
                           for _ in range(num_agents)]
        self.attn = AttentionBlock(cfg.embed_dim, cfg.attn_key_dim,
                                   cfg.attn_value_dim, rng)
        head_sizes = [cfg.embed_dim + cfg.attn_value_dim, *cfg.head_hidden, 1]
        head_acts = ["relu"] * len(cfg.head_hidden) + ["linear"]
        self.heads = [DenseNet(head_sizes, head_acts, rng) for _ in range(num_agents)]
        self._cache_shape = None

    def embed_net(self, agent: int) -> DenseNet:
        return self.embeds[0] if self.shared else self.embeds[agent]

    def q_values(self, obs: np.ndarray, act: np.ndarray, agent: int) -> np.ndarray:
        B, K, _ = obs.shape
        x = np.concatenate([obs, act], axis=2)
        if self.shared:
            flat = self.embeds[0].forward(x.reshape(B * K, -1))
            e = flat.reshape(B, K, -1)
        else:
            e = np.stack([self.embeds[j].forward(x[:, j]) for j in range(K)], axis=1)
        _, v = self.attn.forward(e, agent)
        q = self.heads[agent].forward(np.concatenate([e[:, agent], v], axis=1))
        self._cache_shape = (B, K)
        return q[:, 0]

    def backward(self, d_q: np.ndarray, agent: int, with_param_grads: bool = True):
        """Gradients of sum(d_q * Q) w.r.t. parameters and the joint actions.

        Returns (embed_grads, attn_grads, head_grads, d_act); embed_grads is
        a list aligned with self.embeds. Parameter gradients can be skipped
        when only the action gradient is needed (policy updates).
        """
        B, K = self._cache_shape
        embed_dim = self.attn.embed_dim
        head_grads, d_head_in = self.heads[agent].backward(d_q[:, None],
                                                           with_param_grads)
        d_e = np.zeros((B, K, embed_dim))
        attn_grads, d_e_attn = self.attn.backward(d_head_in[:, embed_dim:])
        d_e += d_e_attn
        d_e[:, agent, :] += d_head_in[:, :embed_dim]
        if self.shared:
            grads, d_x_flat = self.embeds[0].backward(d_e.reshape(B * K, embed_dim),
                                                      with_param_grads)
            embed_grads = [grads]
            d_x = d_x_flat.reshape(B, K, -1)
        else:
            embed_grads = []
            cols = []
            for j in range(K):
                g_j, dx_j = self.embeds[j].backward(d_e[:, j, :], with_param_grads)
                embed_grads.append(g_j)
                cols.append(dx_j)
            d_x = np.stack(cols, axis=1)
        d_act = d_x[:, :, self.obs_dim:]
        return embed_grads, attn_grads, head_grads, d_act

    def components(self, prefix: str) -> dict[str, object]:
        out = {}
        for i, e in enumerate(self.embeds):
            out[f"{prefix}embed{i}"] = e
        out[f"{prefix}attn"] = self.attn
        for kk, h in enumerate(self.heads):
            out[f"{prefix}head{kk}"] = h
        return out

    def copy(self) -> "CriticNet":
        dup = CriticNet.__new__(CriticNet)
        dup.num_agents = self.num_agents
        dup.obs_dim = self.obs_dim
        dup.act_dim = self.act_dim
        dup.shared = self.shared
        dup.embeds = [e.copy() for e in self.embeds]
        dup.attn = self.attn.copy()
        dup.heads = [h.copy() for h in self.heads]
        dup._cache_shape = None
        return dup


# ---------------------------------------------------------------------------
# trainer
# ---------------------------------------------------------------------------

@dataclass
class EpisodeRecord:
    episode: int
    sum_satisfaction: float
    mean_reward: float
    critic_loss: float
    actor_grad_norm: float
    violation_rate: float
    matching_iterations: float
    noise_scale: float
    extra_counts: dict[str, int] = field(default_factory=dict)


class Trainer:
    """Episode loop: act with exploration noise, store, update every agent."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.env = Environment(cfg)
        tc = cfg.training
        K = self.env.num_agents
        do, da = self.env.obs_dim, self.env.act_dim
        rng = stream(cfg.seed, "init")
        actor_sizes = [do, *tc.actor_hidden, da]
        actor_acts = ["relu"] * len(tc.actor_hidden) + ["tanh"]
        self.actors = [DenseNet(actor_sizes, actor_acts, rng) for _ in range(K)]
        self.critic = CriticNet(K, do, da, tc, rng)
        self.target_actors = [a.copy() for a in self.actors]
        self.target_critic = self.critic.copy()
        self.buffer = ReplayBuffer(tc.buffer_capacity, K, do, da,
                                   store_next_actions=tc.next_action_source == "stored")
        self.actor_opts = [Adam([a.flat], tc.actor_lr) for a in self.actors]
        self.embed_opts = [Adam([e.flat], tc.critic_lr) for e in self.critic.embeds]
        self.attn_opt = Adam([self.critic.attn.flat], tc.critic_lr)
        self.head_opts = [Adam([h.flat], tc.critic_lr) for h in self.critic.heads]
        self.start_episode = 0

    # -- acting --------------------------------------------------------

    def noise_scale(self, episode: int) -> float:
        tc = self.cfg.training
        horizon = max(1.0, tc.noise_decay_fraction * tc.episodes)
        frac = min(1.0, episode / horizon)
        return tc.noise_initial + (tc.noise_final - tc.noise_initial) * frac

    def select_actions(self, obs: np.ndarray, noise: float,
                       rng: np.random.Generator | None) -> np.ndarray:
        K = self.env.num_agents
        actions = np.empty((K, self.env.act_dim))
        for k in range(K):
            a = self.actors[k].forward(obs[k][None])[0]
            if noise > 0.0 and rng is not None:
                a = a + noise * rng.standard_normal(a.shape)
            actions[k] = np.clip(a, -1.0, 1.0)
        return actions

    # -- updates -------------------------------------------------------

    def _next_actions(self, batch: dict[str, np.ndarray]) -> np.ndarray:
        if self.cfg.training.next_action_source == "stored":
            return batch["next_act"]
        stacked = batch["next_obs"].transpose(1, 0, 2)   # (K, B, obs)
        return forward_stack(self.target_actors, stacked).transpose(1, 0, 2)

    def critic_update(self, agent: int, batch: dict[str, np.ndarray]) -> float:
        tc = self.cfg.training
        B = len(batch["rew"])
        next_act = self._next_actions(batch)
        target_q = self.target_critic.q_values(batch["next_obs"], next_act, agent)
        y = tc.reward_scale * batch["rew"] + tc.discount * target_q
        q = self.critic.q_values(batch["obs"], batch["act"], agent)
        diff = q - y
        loss = float(np.mean(diff ** 2))
        self.critic.backward((2.0 / B) * diff, agent)
        embed = self.critic.embed_net(agent)
        embed_opt = self.embed_opts[0 if self.critic.shared else agent]
        embed_opt.step([embed.flat], [embed.grad_flat])
        self.attn_opt.step([self.critic.attn.flat], [self.critic.attn.grad_flat])
        head = self.critic.heads[agent]
        self.head_opts[agent].step([head.flat], [head.grad_flat])
        return loss

    def actor_update(self, agent: int, batch: dict[str, np.ndarray]) -> float:
        B = len(batch["rew"])
        a_k = self.actors[agent].forward(batch["obs"][:, agent])
        acts = batch["act"].copy()
        acts[:, agent, :] = a_k
        self.critic.q_values(batch["obs"], acts, agent)
        _, _, _, d_act = self.critic.backward(np.full(B, -1.0 / B), agent,
                                              with_param_grads=False)
        actor = self.actors[agent]
        actor.backward(d_act[:, agent, :])
        self.actor_opts[agent].step([actor.flat], [actor.grad_flat])
        return float(np.sqrt(float((actor.grad_flat ** 2).sum())))

    def soft_updates(self) -> None:
        rate = self.cfg.training.soft_update_rate
        for k in range(self.env.num_agents):
            soft_update([self.target_actors[k].flat], [self.actors[k].flat], rate)
            soft_update([self.target_critic.heads[k].flat],
                        [self.critic.heads[k].flat], rate)
        for tgt, src in zip(self.target_critic.embeds, self.critic.embeds):
            soft_update([tgt.flat], [src.flat], rate)
        soft_update([self.target_critic.attn.flat], [self.critic.attn.flat], rate)

    # -- episodes ------------------------------------------------------

    def run_episode(self, episode: int, learn: bool = True) -> EpisodeRecord:
        tc = self.cfg.training
        env = self.env
        obs = env.reset(episode)
        explore = stream(self.cfg.seed, "explore", episode)
        replay = stream(self.cfg.seed, "replay", episode)
        noise = self.noise_scale(episode) if learn else 0.0

        sum_sat = 0.0
        rewards, losses, norms, match_iters = [], [], [], []
        violations = 0
        counts_total: dict[str, int] = {}
        pending = None  # transition waiting for its successor action
        for _ in range(self.cfg.scenario.steps_per_episode):
            actions = self.select_actions(obs, noise, explore)
            reward, next_obs, metrics = env.step(actions)
            if learn:
                if self.buffer.next_act is None:
                    self.buffer.add(obs, actions, reward, next_obs)
                else:
                    if pending is not None:
                        self.buffer.add(*pending, next_act=actions)
                    pending = (obs, actions, reward, next_obs)
            obs = next_obs
            sum_sat += metrics.sum_satisfaction
            rewards.append(reward)
            match_iters.append(metrics.matching_iterations)
            violations += int(metrics.deadline_violations.sum())
            for c, n in metrics.violation_counts.items():
                counts_total[c] = counts_total.get(c, 0) + n
            if learn and len(self.buffer) >= max(tc.batch_size, tc.warmup_transitions):
                for k in range(env.num_agents):
                    batch = self.buffer.sample(tc.batch_size, replay)
                    losses.append(self.critic_update(k, batch))
                    batch = self.buffer.sample(tc.batch_size, replay)
                    norms.append(self.actor_update(k, batch))
                self.soft_updates()
        if pending is not None:
            # close the episode with the actors' noiseless successor actions
            final_act = self.select_actions(obs, 0.0, None)
            self.buffer.add(*pending, next_act=final_act)

        K = env.num_agents
        steps = self.cfg.scenario.steps_per_episode
        return EpisodeRecord(
            episode=episode,
            sum_satisfaction=sum_sat,
            mean_reward=float(np.mean(rewards)),
            critic_loss=float(np.mean(losses)) if losses else float("nan"),
            actor_grad_norm=float(np.mean(norms)) if norms else float("nan"),
            violation_rate=violations / (K * steps),
            matching_iterations=float(np.mean(match_iters)),
            noise_scale=noise,
            extra_counts=counts_total)

    def train(self, on_episode=None) -> list[EpisodeRecord]:
        records = []
        for ep in range(self.start_episode, self.cfg.training.episodes):
            rec = self.run_episode(ep, learn=True)
            records.append(rec)
            if on_episode is not None:
                on_episode(rec, self)
        return records

    # -- checkpointing ---------------------------------------------------

    def save_checkpoint(self, path) -> None:
        from .neural import save_components
        components: dict[str, object] = {}
        for k, a in enumerate(self.actors):
            components[f"actor{k}"] = a
            components[f"t_actor{k}"] = self.target_actors[k]
        components.update(self.critic.components("critic."))
        components.update(self.target_critic.components("t_critic."))
        meta = {"episode_next": self.env.episode + 1,
                "seed": self.cfg.seed,
                "opt_steps": self._opt_steps(),
                "buffer": {"cursor": self.buffer.cursor, "size": self.buffer.size}}
        arrays = self._opt_arrays()
        arrays.update({"buffer.obs": self.buffer.obs[:self.buffer.size],
                       "buffer.act": self.buffer.act[:self.buffer.size],
                       "buffer.rew": self.buffer.rew[:self.buffer.size],
                       "buffer.next_obs": self.buffer.next_obs[:self.buffer.size]})
        if self.buffer.next_act is not None:
            arrays["buffer.next_act"] = self.buffer.next_act[:self.buffer.size]
        save_components(path, components, meta, extra_arrays=arrays)

    def _optimizers(self) -> dict[str, Adam]:
        opts = {f"actor{k}": o for k, o in enumerate(self.actor_opts)}
        opts.update({f"embed{i}": o for i, o in enumerate(self.embed_opts)})
        opts["attn"] = self.attn_opt
        opts.update({f"head{k}": o for k, o in enumerate(self.head_opts)})
        return opts

    def _opt_steps(self) -> dict[str, int]:
        return {name: o.t for name, o in self._optimizers().items()}

    def _opt_arrays(self) -> dict[str, np.ndarray]:
        arrays = {}
        for name, opt in self._optimizers().items():
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                arrays[f"opt.{name}.m{i}"] = m
                arrays[f"opt.{name}.v{i}"] = v
        return arrays

    @classmethod
    def resume(cls, cfg: ExperimentConfig, path) -> "Trainer":
        from .neural import load_components
        trainer = cls(cfg)
        components, meta, arrays = load_components(path, with_arrays=True)
        for k in range(trainer.env.num_agents):
            _copy_params(trainer.actors[k], components[f"actor{k}"])
            _copy_params(trainer.target_actors[k], components[f"t_actor{k}"])
        _load_critic(trainer.critic, components, "critic.")
        _load_critic(trainer.target_critic, components, "t_critic.")
        for name, opt in trainer._optimizers().items():
            opt.t = meta["opt_steps"][name]
            for i in range(len(opt.m)):
                opt.m[i][...] = arrays[f"opt.{name}.m{i}"]
                opt.v[i][...] = arrays[f"opt.{name}.v{i}"]
        size = meta["buffer"]["size"]
        trainer.buffer.obs[:size] = arrays["buffer.obs"]
        trainer.buffer.act[:size] = arrays["buffer.act"]
        trainer.buffer.rew[:size] = arrays["buffer.rew"]
        trainer.buffer.next_obs[:size] = arrays["buffer.next_obs"]
        if trainer.buffer.next_act is not None:
            trainer.buffer.next_act[:size] = arrays["buffer.next_act"]
        trainer.buffer.size = size
        trainer.buffer.cursor = meta["buffer"]["cursor"]
        trainer.start_episode = meta["episode_next"]
        trainer.env.episode = meta["episode_next"] - 1
        return trainer


def _copy_params(dst, src) -> None:
    for d, s in zip(dst.params(), src.params()):
        d[...] = s


def _load_critic(critic: CriticNet, components: dict, prefix: str) -> None:
    for i, e in enumerate(critic.embeds):
        _copy_params(e, components[f"{prefix}embed{i}"])
    _copy_params(critic.attn, components[f"{prefix}attn"])
    for k, h in enumerate(critic.heads):
        _copy_params(h, components[f"{prefix}head{k}"])
