use rand::Rng;
use serde::{Deserialize, Serialize};

/// Cell of the collection board; row 0 is the lowest, column 0 the leftmost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Square {
    pub row: usize,
    pub col: usize,
}

/// Vertical collection board facing the shoulder, normal along world `y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardLayout {
    pub cols: usize,
    pub rows: usize,
    /// Square edge (m).
    pub square: f64,
    /// Board centre in the world frame (m).
    pub center: [f64; 3],
}

impl Default for BoardLayout {
    fn default() -> Self {
        Self {
            cols: 7,
            rows: 6,
            square: 0.06,
            center: [0.0, 0.33, -0.08],
        }
    }
}

impl BoardLayout {
    pub fn num_squares(&self) -> usize {
        self.cols * self.rows
    }

    /// Squares in row-major order.
    pub fn squares(&self) -> impl Iterator<Item = Square> + '_ {
        (0..self.rows).flat_map(move |row| (0..self.cols).map(move |col| Square { row, col }))
    }

    fn origin(&self) -> (f64, f64) {
        (
            self.center[0] - 0.5 * self.cols as f64 * self.square,
            self.center[2] - 0.5 * self.rows as f64 * self.square,
        )
    }

    pub fn square_center(&self, sq: Square) -> [f64; 3] {
        let (x0, z0) = self.origin();
        [
            x0 + (sq.col as f64 + 0.5) * self.square,
            self.center[1],
            z0 + (sq.row as f64 + 0.5) * self.square,
        ]
    }

    /// Square containing the in-plane projection of `p`, if on the board.
    pub fn square_of(&self, p: &[f64; 3]) -> Option<Square> {
        let (x0, z0) = self.origin();
        let c = ((p[0] - x0) / self.square).floor();
        let r = ((p[2] - z0) / self.square).floor();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return None;
        }
        Some(Square {
            row: r as usize,
            col: c as usize,
        })
    }

    /// Uniform touch point strictly inside a square.
    pub fn random_point<R: Rng>(&self, sq: Square, rng: &mut R) -> [f64; 3] {
        let c = self.square_center(sq);
        let h = 0.5 * self.square * (1.0 - 1e-9);
        [
            c[0] + rng.random_range(-h..h),
            c[1],
            c[2] + rng.random_range(-h..h),
        ]
    }

    /// Largest distance from the origin to any board point.
    pub fn max_reach(&self) -> f64 {
        let (x0, z0) = self.origin();
        let xs = [x0, x0 + self.cols as f64 * self.square];
        let zs = [z0, z0 + self.rows as f64 * self.square];
        xs.iter()
            .flat_map(|x| {
                zs.iter()
                    .map(move |z| (x * x + self.center[1].powi(2) + z * z).sqrt())
            })
            .fold(0.0, f64::max)
    }
}
