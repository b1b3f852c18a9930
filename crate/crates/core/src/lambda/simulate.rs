use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::measure::LambdaMeasure;
use super::rates::RateTable;
use crate::history::{CoalescentHistory, LiveBlocks};
use crate::{invalid, Error, Result};

/// Jump-chain simulator for a fixed measure, reusable across replicates:
/// at `b` blocks wait `Exp(lambda_b)`, draw the merger size `k` with
/// probability `C(b,k) lambda_{b,k}/lambda_b`, merge a uniform `k`-subset.
#[derive(Debug, Clone)]
pub struct LambdaSimulator {
    label: String,
    table: RateTable,
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    <Exp1 as Distribution<f64>>::sample(&Exp1, rng)
}

impl LambdaSimulator {
    pub fn new(m: &LambdaMeasure, n_max: usize) -> Result<Self> {
        Ok(Self {
            label: m.label(),
            table: RateTable::new(m, n_max)?,
        })
    }

    pub fn table(&self) -> &RateTable {
        &self.table
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.table.b_max() {
            Err(invalid(format!(
                "simulator was built for n <= {}, got {n}",
                self.table.b_max()
            )))
        } else {
            Ok(())
        }
    }

    /// Full history from `n` singletons down to one block.
    pub fn history<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<CoalescentHistory> {
        self.history_until(n, f64::INFINITY, rng)
    }

    /// History truncated at time `horizon`.
    pub fn history_until<R: Rng + ?Sized>(
        &self,
        n: usize,
        horizon: f64,
        rng: &mut R,
    ) -> Result<CoalescentHistory> {
        self.check(n)?;
        let mut h = CoalescentHistory::new(n, self.label.clone());
        let mut live = LiveBlocks::new(n);
        let mut t = 0.0;
        while live.len() > 1 {
            let b = live.len();
            t += exp1(rng) / self.table.lambda_b(b);
            if t > horizon {
                break;
            }
            let k = self.table.sample_merger_size(b, rng)?;
            let merged = live.merge_random(k, rng);
            h.push(t, merged);
        }
        Ok(h)
    }

    /// Block counts at the given increasing times, without tracking labels.
    pub fn block_counts<R: Rng + ?Sized>(
        &self,
        n: usize,
        times: &[f64],
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        self.check(n)?;
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("times must be nondecreasing"));
        }
        let mut out = Vec::with_capacity(times.len());
        let mut b = n;
        let mut t = 0.0;
        let mut next = 0;
        while next < times.len() {
            if b <= 1 {
                out.push(b);
                next += 1;
                continue;
            }
            let dt = exp1(rng) / self.table.lambda_b(b);
            while next < times.len() && times[next] < t + dt {
                out.push(b);
                next += 1;
            }
            t += dt;
            let k = self.table.sample_merger_size(b, rng)?;
            b -= k - 1;
        }
        Ok(out)
    }

    /// Total number of merger events on the way from `n` blocks to one.
    pub fn collision_count<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<usize> {
        self.check(n)?;
        let mut b = n;
        let mut events = 0;
        while b > 1 {
            b -= self.table.sample_merger_size(b, rng)? - 1;
            events += 1;
        }
        Ok(events)
    }

    /// Time and size of the first merger involving the blocks of 1 and 2,
    /// as `(time, merged blocks, blocks just before)`.
    pub fn first_pair_merger<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<(f64, usize, usize)> {
        self.check(n)?;
        if n < 2 {
            return Err(invalid("need n >= 2"));
        }
        let mut b = n;
        let mut t = 0.0;
        loop {
            t += exp1(rng) / self.table.lambda_b(b);
            let k = self.table.sample_merger_size(b, rng)?;
            let both = (k * (k - 1)) as f64 / (b * (b - 1)) as f64;
            if rng.random::<f64>() < both {
                return Ok((t, k, b));
            }
            b -= k - 1;
            if b < 2 {
                return Err(Error::Numerical(
                    "chain ended without merging 1 and 2".into(),
                ));
            }
        }
    }
}

/// Λ-coalescent restricted to `[n]`.
pub fn simulate_lambda<R: Rng + ?Sized>(
    m: &LambdaMeasure,
    n: usize,
    rng: &mut R,
) -> Result<CoalescentHistory> {
    LambdaSimulator::new(m, n.max(2))?.history(n, rng)
}
