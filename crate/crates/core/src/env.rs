//! Two-player cooperative task with a hidden goal.
//!
//! A human avatar and a robot effector move in the unit square. One of two
//! goal points, fixed relative to the avatar, is active; only the human
//! observes which. The shared reward pays for effector-goal contact,
//! penalises effector-goal distance, and penalises effector contact with
//! the avatar body away from the goal.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ActionMode, Policy};
use crate::seed::{self, Rng};

/// Dimensions and horizon of a two-player task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub human_obs_dim: usize,
    pub robot_obs_dim: usize,
    pub human_action_dim: usize,
    pub robot_action_dim: usize,
    pub horizon: usize,
    /// `(min_return, max_return)` bounds on an episode return.
    pub reward_range_hint: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CursorAssistConfig {
    pub horizon: usize,
    pub a_max: f64,
    pub r_contact: f64,
    pub w_dist: f64,
    pub r_body: f64,
    pub r_goal_radius: f64,
    pub r_body_radius: f64,
    pub success_streak: usize,
    pub goal_offsets: [[f64; 2]; 2],
    pub human_start: [f64; 2],
    pub robot_start: [f64; 2],
    /// The human avatar stays at least this far from the box edges.
    pub avatar_margin: f64,
}

impl Default for CursorAssistConfig {
    fn default() -> Self {
        Self {
            horizon: 50,
            a_max: 0.05,
            r_contact: 10.0,
            w_dist: 2.0,
            r_body: 20.0,
            r_goal_radius: 0.05,
            r_body_radius: 0.05,
            success_streak: 10,
            goal_offsets: [[-0.2, 0.1], [0.2, 0.1]],
            human_start: [0.5, 0.35],
            robot_start: [0.5, 0.85],
            avatar_margin: 0.2,
        }
    }
}

impl CursorAssistConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a_max", self.a_max),
            ("r_goal_radius", self.r_goal_radius),
            ("r_body_radius", self.r_body_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "env.{name} must be positive, got {v}"
                )));
            }
        }
        let non_negative = [
            ("r_contact", self.r_contact),
            ("w_dist", self.w_dist),
            ("r_body", self.r_body),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("env.{name} must be >= 0, got {v}")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::config("env.horizon must be > 0"));
        }
        if self.success_streak == 0 || self.success_streak > self.horizon {
            return Err(Error::config(format!(
                "env.success_streak must be in 1..={}, got {}",
                self.horizon, self.success_streak
            )));
        }
        let (lo, hi) = self.spec().reward_range_hint;
        if lo >= hi {
            return Err(Error::config(
                "reward range is empty; raise r_contact or penalties",
            ));
        }
        if !(0.0..0.5).contains(&self.avatar_margin) {
            return Err(Error::config("env.avatar_margin must be in [0, 0.5)"));
        }
        let m = self.avatar_margin;
        let in_box = |p: [f64; 2], lo: f64| p.iter().all(|c| (lo..=1.0 - lo).contains(c));
        if !in_box(self.human_start, m) || !in_box(self.robot_start, 0.0) {
            return Err(Error::config("start positions must lie in the unit square (inside the avatar margin for the human)"));
        }
        Ok(())
    }

    pub fn spec(&self) -> EnvSpec {
        let t = self.horizon as f64;
        EnvSpec {
            state_dim: 6,
            human_obs_dim: 7,
            robot_obs_dim: 5,
            human_action_dim: 2,
            robot_action_dim: 2,
            horizon: self.horizon,
            reward_range_hint: (
                -(self.r_body + self.w_dist * std::f64::consts::SQRT_2) * t,
                self.r_contact * t,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CursorAssistState {
    pub human_avatar: [f64; 2],
    pub robot_effector: [f64; 2],
    /// Which goal offset is active. Hidden from the robot.
    pub goal_index: usize,
    pub step: usize,
    pub contact_streak: usize,
}

/// Shared-reward episode record. Observation `t` is the one each player saw
/// before choosing action `t`; `rewards[t]` follows both actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub human_obs: Vec<Vec<f64>>,
    pub robot_obs: Vec<Vec<f64>>,
    pub human_actions: Vec<Vec<f64>>,
    pub robot_actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub success: bool,
    pub goal_index: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct CursorAssist {
    config: CursorAssistConfig,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn clamp_box(p: [f64; 2]) -> [f64; 2] {
    [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0)]
}

impl CursorAssist {
    pub fn new(config: CursorAssistConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &CursorAssistConfig {
        &self.config
    }

    pub fn spec(&self) -> EnvSpec {
        self.config.spec()
    }

    /// Fixed start positions; the goal is drawn uniformly from `rng`.
    pub fn reset_with(&self, rng: &mut Rng) -> CursorAssistState {
        CursorAssistState {
            human_avatar: self.config.human_start,
            robot_effector: self.config.robot_start,
            goal_index: rng.gen_range(0..2),
            step: 0,
            contact_streak: 0,
        }
    }

    pub fn reset(&self, seed: u64) -> CursorAssistState {
        self.reset_with(&mut seed::rng(seed))
    }

    /// Active goal position, clamped to the unit square.
    pub fn goal(&self, state: &CursorAssistState) -> [f64; 2] {
        let off = self.config.goal_offsets[state.goal_index];
        clamp_box([
            state.human_avatar[0] + off[0],
            state.human_avatar[1] + off[1],
        ])
    }

    /// Reward of being in `state`, and whether the effector is on the goal.
    pub fn reward(&self, state: &CursorAssistState) -> (f64, bool) {
        let c = &self.config;
        let d = dist(state.robot_effector, self.goal(state));
        let mut r = -c.w_dist * d;
        let contact = d <= c.r_goal_radius;
        if contact {
            r += c.r_contact;
        } else if dist(state.robot_effector, state.human_avatar) <= c.r_body_radius {
            r -= c.r_body;
        }
        (r, contact)
    }

    /// Integrates clamped velocities, clamps positions to the box and scores
    /// the resulting state.
    pub fn step(
        &self,
        state: &CursorAssistState,
        human_action: &[f64],
        robot_action: &[f64],
    ) -> (CursorAssistState, f64) {
        let a = self.config.a_max;
        let v = |act: &[f64], k: usize| act.get(k).copied().unwrap_or(0.0).clamp(-a, a);
        let mut next = state.clone();
        let m = self.config.avatar_margin;
        next.human_avatar = [
            (state.human_avatar[0] + v(human_action, 0)).clamp(m, 1.0 - m),
            (state.human_avatar[1] + v(human_action, 1)).clamp(m, 1.0 - m),
        ];
        next.robot_effector = clamp_box([
            state.robot_effector[0] + v(robot_action, 0),
            state.robot_effector[1] + v(robot_action, 1),
        ]);
        next.step = state.step + 1;
        let (r, contact) = self.reward(&next);
        next.contact_streak = if contact { state.contact_streak + 1 } else { 0 };
        (next, r)
    }

    /// Human observation (positions, time, one-hot goal) and robot
    /// observation (positions, time). The robot's view never depends on
    /// the goal.
    pub fn observe(&self, state: &CursorAssistState) -> (Vec<f64>, Vec<f64>) {
        let t = state.step as f64 / self.config.horizon as f64;
        let o_r = vec![
            state.human_avatar[0],
            state.human_avatar[1],
            state.robot_effector[0],
            state.robot_effector[1],
            t,
        ];
        let mut o_h = o_r.clone();
        o_h.push(if state.goal_index == 0 { 1.0 } else { 0.0 });
        o_h.push(if state.goal_index == 1 { 1.0 } else { 0.0 });
        (o_h, o_r)
    }

    pub fn is_success(&self, state: &CursorAssistState) -> bool {
        state.contact_streak >= self.config.success_streak
    }

    fn check_dims(&self, human: &dyn Policy, robot: &dyn Policy) -> Result<()> {
        let s = self.spec();
        let pairs = [
            ("human observation", human.obs_dim(), s.human_obs_dim),
            ("human action", human.action_dim(), s.human_action_dim),
            ("robot observation", robot.obs_dim(), s.robot_obs_dim),
            ("robot action", robot.action_dim(), s.robot_action_dim),
        ];
        for (what, got, want) in pairs {
            if got != want {
                return Err(Error::contract(format!(
                    "{what} dimension {got} does not match environment ({want})"
                )));
            }
        }
        Ok(())
    }

    /// Plays one full-horizon episode from `episode_seed`. Policies act in
    /// units of `a_max`; the trajectory stores those unscaled actions.
    pub fn run_episode(
        &self,
        human: &dyn Policy,
        robot: &dyn Policy,
        episode_seed: u64,
        modes: RolloutModes,
    ) -> Result<Trajectory> {
        self.check_dims(human, robot)?;
        let mut rng = seed::rng(episode_seed);
        let mut state = self.reset_with(&mut rng);
        let horizon = self.config.horizon;
        let mut traj = Trajectory {
            human_obs: Vec::with_capacity(horizon),
            robot_obs: Vec::with_capacity(horizon),
            human_actions: Vec::with_capacity(horizon),
            robot_actions: Vec::with_capacity(horizon),
            rewards: Vec::with_capacity(horizon),
            success: false,
            goal_index: state.goal_index,
        };
        for _ in 0..horizon {
            let (o_h, o_r) = self.observe(&state);
            let a_h = human.act(&o_h, &mut rng, modes.human);
            let a_r = robot.act(&o_r, &mut rng, modes.robot);
            let a_max = self.config.a_max;
            let v_h: Vec<f64> = a_h.iter().map(|a| a * a_max).collect();
            let v_r: Vec<f64> = a_r.iter().map(|a| a * a_max).collect();
            let (next, r) = self.step(&state, &v_h, &v_r);
            traj.success |= self.is_success(&next);
            traj.human_obs.push(o_h);
            traj.robot_obs.push(o_r);
            traj.human_actions.push(a_h);
            traj.robot_actions.push(a_r);
            traj.rewards.push(r);
            state = next;
        }
        Ok(traj)
    }
}

/// How each player picks actions during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutModes {
    pub human: ActionMode,
    pub robot: ActionMode,
}

impl RolloutModes {
    /// Both players sample; used while training both of them.
    pub const TRAIN: Self = Self {
        human: ActionMode::Sample,
        robot: ActionMode::Sample,
    };
    /// The human samples, the deployed robot acts on its mean.
    pub const DEPLOY: Self = Self {
        human: ActionMode::Sample,
        robot: ActionMode::Greedy,
    };
}

/// Seed of episode `index` within a rollout seeded by `seed`.
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    seed::derive(seed::derive(seed, seed::stream::EPISODE), index as u64)
}

/// Plays `n_episodes` episodes; episode `i` is seeded by
/// [`episode_seed`]`(seed, i)`.
pub fn rollout(
    env: &CursorAssist,
    human: &dyn Policy,
    robot: &dyn Policy,
    n_episodes: usize,
    seed: u64,
    modes: RolloutModes,
) -> Result<Vec<Trajectory>> {
    (0..n_episodes)
        .map(|i| env.run_episode(human, robot, episode_seed(seed, i), modes))
        .collect()
}

/// Summary statistics of a set of episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub mean_return: f64,
    pub success_rate: f64,
    pub episodes: usize,
}

impl EpisodeStats {
    pub fn of(trajectories: &[Trajectory]) -> Self {
        let n = trajectories.len().max(1) as f64;
        Self {
            mean_return: trajectories
                .iter()
                .map(Trajectory::total_reward)
                .sum::<f64>()
                / n,
            success_rate: trajectories.iter().filter(|t| t.success).count() as f64 / n,
            episodes: trajectories.len(),
        }
    }
}
