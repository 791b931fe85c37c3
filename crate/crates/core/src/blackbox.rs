//! Memoized evaluation of the function under explanation.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{EvalFailure, Error, Result};
use crate::space::{Context, PerturbationSpace};

pub const DEFAULT_BATCH_SIZE: usize = 256;

/// Anything that can score a batch of contexts of a perturbation space.
///
/// Implementations receive masks rather than vectors so that remote hosts
/// may do their own input encoding; [`FnEvaluator`] realizes them locally.
pub trait Evaluator: Send + Sync {
    fn evaluate(
        &self,
        space: &PerturbationSpace,
        batch: &[Context],
    ) -> std::result::Result<Vec<f64>, EvalFailure>;
}

/// Wraps a plain function of the realized input vector.
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn evaluate(
        &self,
        space: &PerturbationSpace,
        batch: &[Context],
    ) -> std::result::Result<Vec<f64>, EvalFailure> {
        batch
            .iter()
            .map(|ctx| {
                let v = space
                    .realize(ctx)
                    .map_err(|e| EvalFailure::Message(e.to_string()))?;
                Ok((self.0)(&v))
            })
            .collect()
    }
}

/// The function under explanation, bound to a perturbation space.
///
/// Results are cached by mask; `call_count` counts cache misses only.
/// Evaluation of misses is serialized so a mask is never evaluated twice,
/// while cache hits proceed concurrently.
pub struct BlackBox {
    space: Arc<PerturbationSpace>,
    evaluator: Box<dyn Evaluator>,
    cache: Mutex<HashMap<Context, f64>>,
    eval_lock: Mutex<()>,
    calls: AtomicU64,
    batch_size: usize,
}

impl BlackBox {
    pub fn new(space: PerturbationSpace, evaluator: impl Evaluator + 'static) -> Self {
        Self::from_boxed(space, Box::new(evaluator))
    }

    pub fn from_boxed(space: PerturbationSpace, evaluator: Box<dyn Evaluator>) -> Self {
        Self {
            space: Arc::new(space),
            evaluator,
            cache: Mutex::new(HashMap::new()),
            eval_lock: Mutex::new(()),
            calls: AtomicU64::new(0),
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }

    /// Convenience constructor for in-process closures over realized vectors.
    pub fn from_fn<F>(space: PerturbationSpace, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(space, FnEvaluator(f))
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn space(&self) -> &PerturbationSpace {
        &self.space
    }

    pub fn p(&self) -> usize {
        self.space.p()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Number of distinct contexts that reached the evaluator.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn cached(&self, ctx: &Context) -> Option<f64> {
        self.cache.lock().expect("cache poisoned").get(ctx).copied()
    }

    pub fn eval(&self, ctx: &Context) -> Result<f64> {
        Ok(self.eval_batch(std::slice::from_ref(ctx))?[0])
    }

    pub fn eval_target(&self) -> Result<f64> {
        self.eval(&Context::target(self.p()))
    }

    pub fn eval_baseline(&self) -> Result<f64> {
        self.eval(&Context::baseline(self.p()))
    }

    /// Evaluates `ctxs`, returning outputs in input order.
    pub fn eval_batch(&self, ctxs: &[Context]) -> Result<Vec<f64>> {
        for ctx in ctxs {
            self.space.check_context(ctx)?;
        }
        if let Some(out) = self.lookup_all(ctxs) {
            return Ok(out);
        }

        let _serial = self.eval_lock.lock().expect("evaluation lock poisoned");
        // another worker may have filled some entries while we waited
        let misses: Vec<Context> = {
            let cache = self.cache.lock().expect("cache poisoned");
            let mut seen = std::collections::HashSet::new();
            ctxs.iter()
                .filter(|c| !cache.contains_key(*c) && seen.insert(*c))
                .cloned()
                .collect()
        };
        for chunk in misses.chunks(self.batch_size) {
            let values = self
                .evaluator
                .evaluate(&self.space, chunk)
                .map_err(|e| Error::evaluation(&chunk[0], e))?;
            if values.len() != chunk.len() {
                return Err(Error::evaluation(
                    &chunk[0],
                    EvalFailure::Message(format!(
                        "evaluator returned {} outputs for {} inputs",
                        values.len(),
                        chunk.len()
                    )),
                ));
            }
            if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::evaluation(
                    &chunk[pos],
                    EvalFailure::Message(format!("evaluator returned {}", values[pos])),
                ));
            }
            self.calls.fetch_add(chunk.len() as u64, Ordering::SeqCst);
            let mut cache = self.cache.lock().expect("cache poisoned");
            for (ctx, v) in chunk.iter().zip(values) {
                cache.insert(ctx.clone(), v);
            }
        }
        Ok(self
            .lookup_all(ctxs)
            .expect("every requested context was just evaluated"))
    }

    fn lookup_all(&self, ctxs: &[Context]) -> Option<Vec<f64>> {
        let cache = self.cache.lock().expect("cache poisoned");
        ctxs.iter().map(|c| cache.get(c).copied()).collect()
    }

    /// Re-evaluates `probe` directly (bypassing the cache) and compares it with
    /// the memoized value, rejecting evaluators that drift by more than 1e-9.
    pub fn check_deterministic(&self, probe: &Context) -> Result<()> {
        let first = self.eval(probe)?;
        let second = self
            .evaluator
            .evaluate(&self.space, std::slice::from_ref(probe))
            .map_err(|e| Error::evaluation(probe, e))?
            .first()
            .copied()
            .ok_or_else(|| {
                Error::evaluation(probe, EvalFailure::Message("empty reply".into()))
            })?;
        if (first - second).abs() > 1e-9 {
            return Err(Error::Nondeterministic {
                mask: probe.to_string(),
                first,
                second,
            });
        }
        Ok(())
    }
}

impl std::fmt::Debug for BlackBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlackBox")
            .field("p", &self.p())
            .field("calls", &self.call_count())
            .field("batch_size", &self.batch_size)
            .finish_non_exhaustive()
    }
}
