//! Two 3x3 rooms side by side, joined by a doorway between the middle-right
//! cell of the left room and the middle-left cell of the right room.
//!
//! ```text
//!   S . . | . . .
//!   . . .   . . .      door crossing succeeds with probability 0.5
//!   . . . | . . T
//! ```
//!
//! The agent picks up/down/left/right uniformly. Bumping into the outer wall
//! or the partition leaves it in place. Reward is 1 in every non-terminal
//! state; the terminal is absorbing with reward 0.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::markov::StochasticMatrix;
use crate::mdp::{Episodic, TabularMdp};

const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[derive(Debug, Clone, PartialEq)]
pub struct RoomWorld {
    pub rows: usize,
    /// Width of each room.
    pub room_cols: usize,
    pub door_row: usize,
    pub door_success: f64,
    pub gamma: f64,
}

impl Default for RoomWorld {
    fn default() -> Self {
        RoomWorld {
            rows: 3,
            room_cols: 3,
            door_row: 1,
            door_success: 0.5,
            gamma: 0.9,
        }
    }
}

pub fn room_world() -> RoomWorld {
    RoomWorld::default()
}

impl RoomWorld {
    pub fn cols(&self) -> usize {
        2 * self.room_cols
    }

    pub fn n_states(&self) -> usize {
        self.rows * self.cols()
    }

    pub fn state(&self, row: usize, col: usize) -> usize {
        row * self.cols() + col
    }

    pub fn cell(&self, s: usize) -> (usize, usize) {
        (s / self.cols(), s % self.cols())
    }

    pub fn start(&self) -> usize {
        self.state(0, 0)
    }

    pub fn terminal(&self) -> usize {
        self.state(self.rows - 1, self.cols() - 1)
    }

    fn crosses_partition(&self, c: usize, c2: usize) -> bool {
        c.min(c2) == self.room_cols - 1 && c.max(c2) == self.room_cols
    }

    /// Outcomes of one action from `s`: `(next, probability)` pairs.
    pub fn action_outcomes(&self, s: usize, action: usize) -> Vec<(usize, f64)> {
        let (r, c) = self.cell(s);
        let (dr, dc) = MOVES[action];
        let (r2, c2) = (r as isize + dr, c as isize + dc);
        if r2 < 0 || c2 < 0 || r2 >= self.rows as isize || c2 >= self.cols() as isize {
            return vec![(s, 1.0)];
        }
        let (r2, c2) = (r2 as usize, c2 as usize);
        let target = self.state(r2, c2);
        if self.crosses_partition(c, c2) {
            if r == self.door_row {
                return vec![(target, self.door_success), (s, 1.0 - self.door_success)];
            }
            return vec![(s, 1.0)];
        }
        vec![(target, 1.0)]
    }

    /// Chain induced by the uniform-random policy.
    pub fn mdp(&self) -> Result<TabularMdp> {
        if self.rows == 0 || self.room_cols == 0 || self.door_row >= self.rows {
            return Err(Error::InvalidParameter("degenerate room geometry".into()));
        }
        if !(0.0..=1.0).contains(&self.door_success) {
            return Err(Error::InvalidParameter(format!(
                "door success {} outside [0, 1]",
                self.door_success
            )));
        }
        let n = self.n_states();
        let terminal = self.terminal();
        let mut m = DMatrix::zeros(n, n);
        for s in 0..n {
            if s == terminal {
                m[(s, s)] = 1.0;
                continue;
            }
            for a in 0..MOVES.len() {
                for (next, p) in self.action_outcomes(s, a) {
                    m[(s, next)] += p / MOVES.len() as f64;
                }
            }
        }
        let mut reward = vec![1.0; n];
        reward[terminal] = 0.0;
        TabularMdp::new(StochasticMatrix::new(m)?, reward, self.gamma)?.with_episodic(Episodic {
            start: self.start(),
            terminal,
        })
    }
}
