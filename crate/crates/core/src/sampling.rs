//! Reproducible quasi-random sample points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid2D, Point2};

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Domain {
    pub const fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Domain { xmin, xmax, ymin, ymax }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.xmin, self.xmax, self.ymin, self.ymax].iter().all(|v| v.is_finite())
            && self.xmax > self.xmin
            && self.ymax > self.ymin;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!("degenerate domain {self:?}")))
        }
    }

    pub fn grid(&self, nx: usize, ny: usize) -> Result<Grid2D> {
        self.validate()?;
        Grid2D::from_domain(self.xmin, self.xmax, self.ymin, self.ymax, nx, ny)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// `n` points of a randomly shifted Halton(2, 3) sequence in `domain` that
/// satisfy `accept`. The shift is drawn from `seed`, so equal seeds give
/// equal points.
pub fn sample_points(domain: &Domain, n: usize, seed: u64, accept: impl Fn(Point2) -> bool) -> Result<Vec<Point2>> {
    domain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: (f64, f64) = (rng.random(), rng.random());
    let mut out = Vec::with_capacity(n);
    let budget = 200 * n.max(1) as u64;
    let mut k = 1;
    while out.len() < n {
        if k > budget {
            return Err(Error::InvalidParameter(format!(
                "only {} of {n} sample points satisfy the domain predicate",
                out.len()
            )));
        }
        let u = (radical_inverse(k, 2) + shift.0).fract();
        let v = (radical_inverse(k, 3) + shift.1).fract();
        let p = Point2::new(
            domain.xmin + u * (domain.xmax - domain.xmin),
            domain.ymin + v * (domain.ymax - domain.ymin),
        );
        if accept(p) {
            out.push(p);
        }
        k += 1;
    }
    Ok(out)
}
