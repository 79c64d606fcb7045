//! Euclidean projection onto `{lb <= x <= ub, Σx <= s, A x <= c}` with a
//! nonnegative matrix `A`.

/// Bounds for the inter-pair power vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub sum_max: f64,
    /// One row per antenna: `|q_n[ι]|^2` for each pair `n`.
    pub rows: Vec<Vec<f64>>,
    pub row_max: f64,
}

const DYKSTRA_ROUNDS: usize = 2000;
const RESIDUAL: f64 = 1e-10;

impl Polytope {
    pub fn dim(&self) -> usize {
        self.lb.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let slack = |bound: f64| tol * bound.abs().max(1.0);
        x.iter()
            .zip(self.lb.iter().zip(&self.ub))
            .all(|(v, (l, u))| *v >= l - slack(*l) && *v <= u + slack(*u))
            && x.iter().sum::<f64>() <= self.sum_max + slack(self.sum_max)
            && self
                .rows
                .iter()
                .all(|r| dot(r, x) <= self.row_max + slack(self.row_max))
    }

    /// Closest point of the box-and-sum set, by bisection on the multiplier
    /// of the sum constraint.
    pub fn project_box_sum(&self, y: &[f64]) -> Vec<f64> {
        let clamp = |mu: f64| -> Vec<f64> {
            y.iter()
                .zip(self.lb.iter().zip(&self.ub))
                .map(|(v, (l, u))| (v - mu).clamp(*l, *u))
                .collect()
        };
        let x = clamp(0.0);
        if x.iter().sum::<f64>() <= self.sum_max {
            return x;
        }
        let mut lo = 0.0;
        let mut hi = y
            .iter()
            .zip(&self.lb)
            .map(|(v, l)| v - l)
            .fold(0.0_f64, f64::max)
            .max(1e-300);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if clamp(mid).iter().sum::<f64>() > self.sum_max {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        clamp(hi)
    }

    fn project_halfspace(row: &[f64], cap: f64, x: &mut [f64]) {
        let excess = dot(row, x) - cap;
        let nrm = dot(row, row);
        if excess > 0.0 && nrm > 0.0 {
            let t = excess / nrm;
            for (xi, ri) in x.iter_mut().zip(row) {
                *xi -= t * ri;
            }
        }
    }

    /// Projection by Dykstra's alternating scheme, followed by a pull toward
    /// `lb` if the rounds run out before every row is satisfied.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let first = self.project_box_sum(y);
        if self.rows_ok(&first) {
            return first;
        }
        let mut x = y.to_vec();
        let sets = self.rows.len() + 1;
        let mut incr = vec![vec![0.0; y.len()]; sets];
        for _ in 0..DYKSTRA_ROUNDS {
            let before = x.clone();
            for (k, inc) in incr.iter_mut().enumerate() {
                let z: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
                let next = if k == 0 {
                    self.project_box_sum(&z)
                } else {
                    let mut w = z.clone();
                    Self::project_halfspace(&self.rows[k - 1], self.row_max, &mut w);
                    w
                };
                for ((i, zi), ni) in inc.iter_mut().zip(&z).zip(&next) {
                    *i = zi - ni;
                }
                x = next;
            }
            let moved = x.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved <= RESIDUAL && self.rows_ok(&x) {
                break;
            }
        }
        self.repair(x)
    }

    fn rows_ok(&self, x: &[f64]) -> bool {
        self.rows.iter().all(|r| dot(r, x) <= self.row_max * (1.0 + 1e-12))
    }

    /// Moves `x` toward `lb` just enough to satisfy every constraint.
    fn repair(&self, x: Vec<f64>) -> Vec<f64> {
        let mut x = self.project_box_sum(&x);
        if self.rows_ok(&x) {
            return x;
        }
        let base: Vec<f64> = self.rows.iter().map(|r| dot(r, &self.lb)).collect();
        let mut t: f64 = 1.0;
        for (r, b) in self.rows.iter().zip(&base) {
            let full = dot(r, &x);
            if full > self.row_max && full > *b {
                t = t.min(((self.row_max - b) / (full - b)).max(0.0));
            }
        }
        for (xi, l) in x.iter_mut().zip(&self.lb) {
            *xi = l + t * (*xi - l);
        }
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
