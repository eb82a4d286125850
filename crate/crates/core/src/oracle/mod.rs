//! Query-counted entry access to a hidden matrix.
//!
//! Algorithms only ever see a matrix through [`EntryAccess`]. The concrete
//! [`QueryOracle`] charges one query per `entry` call; [`CachedSource`] sits
//! in front of it for the duration of one run so that an entry that was
//! already read is not paid for twice.

mod instances;
mod spec;

pub use instances::{squared_distances, Instance, InstanceMeta};
pub use spec::{Corruption, Family, InstanceSpec, RobustSplit};

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Vector};

/// Entry-level read access. Every implementation must route reads of the
/// hidden matrix through a counted oracle.
pub trait EntryAccess: Sync {
    fn n(&self) -> usize;

    fn entry(&self, i: usize, j: usize) -> Result<f64>;

    /// Total queries charged to the backing oracle so far.
    fn queries(&self) -> u64;

    fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = self.entry(i, j)?;
            }
        }
        Ok(out)
    }

    /// Full columns `cols` (an `n × |cols|` matrix).
    fn columns(&self, cols: &[usize]) -> Result<DenseMatrix> {
        let rows: Vec<usize> = (0..self.n()).collect();
        self.submatrix(&rows, cols)
    }

    /// Full rows `rows` (a `|rows| × n` matrix).
    fn rows(&self, rows: &[usize]) -> Result<DenseMatrix> {
        let cols: Vec<usize> = (0..self.n()).collect();
        self.submatrix(rows, &cols)
    }

    fn diagonal(&self) -> Result<Vector> {
        let n = self.n();
        let mut d = Vector::zeros(n);
        for i in 0..n {
            d[i] = self.entry(i, i)?;
        }
        Ok(d)
    }
}

/// Entry cap `φ_max·√|d_i d_j|` built from a pre-read diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub phi_max: f64,
    pub diag: Vec<f64>,
}

impl Truncation {
    pub fn cap(&self, i: usize, j: usize) -> f64 {
        self.phi_max * (self.diag[i] * self.diag[j]).abs().sqrt()
    }

    pub fn apply(&self, i: usize, j: usize, value: f64) -> f64 {
        let cap = self.cap(i, j);
        value.clamp(-cap, cap)
    }
}

/// Counted access to a hidden `n × n` matrix.
#[derive(Debug)]
pub struct QueryOracle {
    hidden: Arc<DenseMatrix>,
    truth: Option<Arc<DenseMatrix>>,
    queries: AtomicU64,
    truncation: RwLock<Option<Truncation>>,
}

impl QueryOracle {
    /// Oracle whose hidden matrix is also the evaluation ground truth.
    pub fn new(a: DenseMatrix) -> Result<Self> {
        Self::build(a, None)
    }

    /// Oracle over a corrupted matrix `hidden = A + N` with clean `A` kept
    /// aside for evaluation.
    pub fn with_ground_truth(hidden: DenseMatrix, truth: DenseMatrix) -> Result<Self> {
        if hidden.shape() != truth.shape() {
            return Err(Error::invalid("hidden and ground truth shapes differ"));
        }
        Self::build(hidden, Some(truth))
    }

    fn build(hidden: DenseMatrix, truth: Option<DenseMatrix>) -> Result<Self> {
        if !hidden.is_square() {
            return Err(Error::invalid("oracle matrix must be square"));
        }
        crate::linalg::ensure_finite(&hidden, "oracle")?;
        Ok(QueryOracle {
            hidden: Arc::new(hidden),
            truth: truth.map(Arc::new),
            queries: AtomicU64::new(0),
            truncation: RwLock::new(None),
        })
    }

    /// A fresh oracle over the same hidden matrix with its own zeroed counter
    /// and no truncation rule.
    pub fn replica(&self) -> QueryOracle {
        QueryOracle {
            hidden: Arc::clone(&self.hidden),
            truth: self.truth.clone(),
            queries: AtomicU64::new(0),
            truncation: RwLock::new(None),
        }
    }

    /// Clean matrix for evaluation. Reading it is not a query.
    pub fn ground_truth(&self) -> &DenseMatrix {
        self.truth.as_deref().unwrap_or(&self.hidden)
    }

    /// The matrix as `entry` would return it, truncation included, read
    /// without charging queries. Evaluation only.
    pub fn observed(&self) -> DenseMatrix {
        match self.truncation() {
            None => (*self.hidden).clone(),
            Some(rule) => DenseMatrix::from_fn(self.hidden.nrows(), self.hidden.ncols(), |i, j| {
                rule.apply(i, j, self.hidden[(i, j)])
            }),
        }
    }

    pub fn has_separate_ground_truth(&self) -> bool {
        self.truth.is_some()
    }

    pub fn set_truncation(&self, rule: Option<Truncation>) -> Result<()> {
        if let Some(r) = &rule {
            if r.diag.len() != self.hidden.nrows() {
                return Err(Error::invalid("truncation diagonal has wrong length"));
            }
            if !(r.phi_max >= 1.0) {
                return Err(Error::invalid("phi_max must be at least 1"));
            }
        }
        *self.truncation.write().expect("truncation lock poisoned") = rule;
        Ok(())
    }

    pub fn truncation(&self) -> Option<Truncation> {
        self.truncation.read().expect("truncation lock poisoned").clone()
    }

    pub fn reset_queries(&self) {
        self.queries.store(0, Ordering::SeqCst);
    }
}

impl EntryAccess for QueryOracle {
    fn n(&self) -> usize {
        self.hidden.nrows()
    }

    fn entry(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.hidden.nrows();
        if i >= n || j >= n {
            return Err(Error::invalid(format!(
                "entry ({i}, {j}) out of range for n = {n}"
            )));
        }
        self.queries.fetch_add(1, Ordering::Relaxed);
        let v = self.hidden[(i, j)];
        match &*self.truncation.read().expect("truncation lock poisoned") {
            Some(rule) => Ok(rule.apply(i, j, v)),
            None => Ok(v),
        }
    }

    fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

/// Memoizing front for one run. With `symmetric` set, `(i, j)` and `(j, i)`
/// share a cache slot; only use that when the hidden matrix is symmetric and
/// no asymmetric corruption is in play.
pub struct CachedSource<'a> {
    inner: &'a dyn EntryAccess,
    symmetric: bool,
    cache: Mutex<HashMap<(u32, u32), f64>>,
}

impl<'a> CachedSource<'a> {
    pub fn new(inner: &'a dyn EntryAccess, symmetric: bool) -> Self {
        CachedSource {
            inner,
            symmetric,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Number of distinct entries read through this cache.
    pub fn distinct(&self) -> usize {
        self.cache.lock().expect("cache lock poisoned").len()
    }
}

impl EntryAccess for CachedSource<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn entry(&self, i: usize, j: usize) -> Result<f64> {
        let key = if self.symmetric && j < i {
            (j as u32, i as u32)
        } else {
            (i as u32, j as u32)
        };
        if let Some(v) = self.cache.lock().expect("cache lock poisoned").get(&key) {
            return Ok(*v);
        }
        let v = self.inner.entry(i, j)?;
        self.cache.lock().expect("cache lock poisoned").insert(key, v);
        Ok(v)
    }

    fn queries(&self) -> u64 {
        self.inner.queries()
    }
}

/// Records the backing counter at stage boundaries so that per-stage
/// deltas always add up to the run total.
#[derive(Debug, Clone)]
pub struct StageMeter {
    start: u64,
    last: u64,
    stages: Vec<(String, u64)>,
}

impl StageMeter {
    pub fn start(access: &dyn EntryAccess) -> Self {
        let q = access.queries();
        StageMeter {
            start: q,
            last: q,
            stages: Vec::new(),
        }
    }

    /// Closes the current stage under `name`.
    pub fn mark(&mut self, access: &dyn EntryAccess, name: &str) {
        let now = access.queries();
        self.stages.push((name.to_string(), now - self.last));
        self.last = now;
    }

    pub fn total(&self) -> u64 {
        self.last - self.start
    }

    pub fn stages(&self) -> &[(String, u64)] {
        &self.stages
    }

    pub fn into_stages(self) -> Vec<(String, u64)> {
        self.stages
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_increments_per_read() {
        let o = QueryOracle::new(DenseMatrix::identity(3, 3)).unwrap();
        assert_eq!(o.queries(), 0);
        assert_eq!(o.entry(0, 0).unwrap(), 1.0);
        assert_eq!(o.queries(), 1);
        o.entry(1, 2).unwrap();
        o.entry(1, 2).unwrap();
        assert_eq!(o.queries(), 3);
    }

    #[test]
    fn out_of_range_is_rejected_without_charge() {
        let o = QueryOracle::new(DenseMatrix::identity(3, 3)).unwrap();
        assert!(matches!(o.entry(3, 0), Err(Error::InvalidInput(_))));
        assert_eq!(o.queries(), 0);
    }

    #[test]
    fn truncation_caps_large_entries() {
        let mut m = DenseMatrix::identity(3, 3) * 4.0;
        m[(0, 2)] = 50.0;
        m[(2, 0)] = -50.0;
        m[(2, 2)] = 9.0;
        let o = QueryOracle::new(m.clone()).unwrap();
        let diag = vec![4.0, 4.0, 9.0];
        o.set_truncation(Some(Truncation { phi_max: 2.0, diag }))
            .unwrap();
        let cap = 2.0 * (4.0f64 * 9.0).sqrt();
        assert_eq!(o.entry(0, 2).unwrap(), cap);
        assert_eq!(o.entry(2, 0).unwrap(), -cap);
        assert_eq!(o.entry(1, 1).unwrap(), 4.0);
        assert_eq!(o.ground_truth()[(0, 2)], 50.0);
    }

    #[test]
    fn replica_has_fresh_counter() {
        let o = QueryOracle::new(DenseMatrix::identity(2, 2)).unwrap();
        o.entry(0, 0).unwrap();
        let r = o.replica();
        assert_eq!(r.queries(), 0);
        assert_eq!(o.queries(), 1);
    }

    #[test]
    fn cache_charges_each_entry_once() {
        let o = QueryOracle::new(DenseMatrix::identity(4, 4)).unwrap();
        let c = CachedSource::new(&o, true);
        c.entry(1, 2).unwrap();
        c.entry(2, 1).unwrap();
        c.entry(1, 2).unwrap();
        assert_eq!(o.queries(), 1);
        let plain = CachedSource::new(&o, false);
        plain.entry(1, 2).unwrap();
        plain.entry(2, 1).unwrap();
        assert_eq!(o.queries(), 3);
    }

    #[test]
    fn concurrent_reads_are_all_counted() {
        let o = QueryOracle::new(DenseMatrix::identity(8, 8)).unwrap();
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    for i in 0..8 {
                        for j in 0..8 {
                            o.entry(i, j).unwrap();
                        }
                    }
                });
            }
        });
        assert_eq!(o.queries(), 256);
    }

    #[test]
    fn stage_meter_sums_to_total() {
        let o = QueryOracle::new(DenseMatrix::identity(4, 4)).unwrap();
        o.entry(0, 0).unwrap();
        let mut m = StageMeter::start(&o);
        o.diagonal().unwrap();
        m.mark(&o, "diag");
        o.rows(&[1, 2]).unwrap();
        m.mark(&o, "rows");
        let sum: u64 = m.stages().iter().map(|s| s.1).sum();
        assert_eq!(sum, m.total());
        assert_eq!(m.total(), 12);
    }
}
