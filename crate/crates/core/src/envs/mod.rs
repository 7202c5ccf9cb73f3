//! Synthetic environments, each built reproducibly from a seed.

pub mod random;
pub mod room;
pub mod variance;
pub mod walk;

pub use random::{random_mdp, smooth_rewards, RewardMode, RANDOM_MDP_GAMMA};
pub use room::{room_world, RoomWorld};
pub use variance::{three_state_variance_mdp, VarianceMdp};
pub use walk::{noisy_walk_step, theta_star, NoisyWalk, NoisyWalkConfig};
