use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A sample count or basis size; `Full` stands for all `N` vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSize {
    Count(usize),
    Full,
}

impl LevelSize {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            LevelSize::Count(k) => k,
            LevelSize::Full => n,
        }
    }
}

impl FromStr for LevelSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "N" {
            return Ok(LevelSize::Full);
        }
        s.parse()
            .map(LevelSize::Count)
            .map_err(|_| Error::InvalidArgument(format!("level size {s:?} is neither a count nor \"N\"")))
    }
}

impl fmt::Display for LevelSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelSize::Count(k) => write!(f, "{k}"),
            LevelSize::Full => f.write_str("N"),
        }
    }
}

/// Paired sample-count and basis-size hierarchies. Level `i` uses
/// `q[min(i, |q|-1)]` and `p[min(i, |p|-1)]`; the number of levels is the
/// longer of the two lists.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiresSchedule {
    pub q: Vec<LevelSize>,
    pub p: Vec<LevelSize>,
    /// Minimum samples per basis function.
    pub c: f64,
}

impl MultiresSchedule {
    pub fn new(q: Vec<LevelSize>, p: Vec<LevelSize>) -> Self {
        Self { q, p, c: 2.0 }
    }

    /// Parses comma-separated lists such as `"200,600,N"`.
    pub fn parse(q: &str, p: &str) -> Result<Self> {
        let list = |s: &str| -> Result<Vec<LevelSize>> { s.split(',').map(str::parse).collect() };
        Ok(Self::new(list(q)?, list(p)?))
    }

    pub fn with_ratio(mut self, c: f64) -> Self {
        if !(c > 1.0 && c <= 2.0) {
            log::warn!("sampling ratio c = {c} lies outside the usual range (1, 2]");
        }
        self.c = c;
        self
    }

    pub fn num_levels(&self) -> usize {
        self.q.len().max(self.p.len())
    }

    /// Concrete `(q, p)` pairs for `n` vertices. Both hierarchies must be
    /// nondecreasing, `p <= q <= n`, and every level with `q < n` must meet
    /// `q >= c p`. A level with `q = n` is a full-resolution level.
    pub fn resolve(&self, n: usize) -> Result<Vec<(usize, usize)>> {
        if self.q.is_empty() || self.p.is_empty() {
            return Err(Error::InvalidArgument("schedule lists must be nonempty".into()));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling ratio c = {} must be positive", self.c)));
        }
        let pick = |v: &[LevelSize], i: usize| v[i.min(v.len() - 1)].resolve(n);
        let mut levels = Vec::with_capacity(self.num_levels());
        for i in 0..self.num_levels() {
            let (q, p) = (pick(&self.q, i), pick(&self.p, i));
            if p == 0 || q == 0 {
                return Err(Error::InvalidArgument(format!("level {i}: sizes must be positive")));
            }
            if q > n || p > n {
                return Err(Error::InvalidArgument(format!("level {i}: q = {q}, p = {p} exceed N = {n}")));
            }
            if p > q {
                return Err(Error::InvalidArgument(format!("level {i}: p = {p} exceeds q = {q}")));
            }
            if q < n && (q as f64) < self.c * p as f64 {
                return Err(Error::InvalidArgument(format!(
                    "level {i}: q = {q} is below c * p = {} (sampling criterion)",
                    self.c * p as f64
                )));
            }
            if p == n && q < n {
                return Err(Error::InvalidArgument(format!("level {i}: p = N requires q = N")));
            }
            if let Some(&(pq, pp)) = levels.last() {
                if q < pq || p < pp {
                    return Err(Error::InvalidArgument(format!("level {i}: schedule must be nondecreasing")));
                }
            }
            levels.push((q, p));
        }
        Ok(levels)
    }
}
