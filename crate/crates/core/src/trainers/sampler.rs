use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{generate_with_rng, Dataset, GeneratorSpec, Label};
use crate::geometry::check_dim;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    /// Fresh draws from a generator.
    Online,
    /// Uniform draws with replacement from a fixed dataset.
    WithReplacement,
    /// Every step uses the whole dataset.
    FullBatch,
}

/// One labelled example per call.
pub trait Sampler {
    fn dim(&self) -> usize;

    fn mode(&self) -> SamplerMode;

    /// Writes the next point into `x` and returns its label.
    fn draw(&mut self, x: &mut [f64]) -> Result<Label>;
}

/// An endless stream of fresh samples from a generator.
///
/// Points are produced in chunks from a single seeded RNG. Per-dataset
/// post-processing (label noise, normalization) is applied chunk by chunk.
#[derive(Debug, Clone)]
pub struct OnlineStream {
    spec: GeneratorSpec,
    rng: ChaCha8Rng,
    chunk: Option<Dataset>,
    next: usize,
}

const CHUNK: usize = 4096;

impl OnlineStream {
    pub fn new(spec: GeneratorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(OnlineStream { spec, rng: ChaCha8Rng::seed_from_u64(seed), chunk: None, next: 0 })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }
}

impl Sampler for OnlineStream {
    fn dim(&self) -> usize {
        self.spec.d
    }

    fn mode(&self) -> SamplerMode {
        SamplerMode::Online
    }

    fn draw(&mut self, x: &mut [f64]) -> Result<Label> {
        check_dim(self.spec.d, x.len())?;
        let exhausted = self.chunk.as_ref().map_or(true, |c| self.next >= c.n());
        if exhausted {
            self.chunk = Some(generate_with_rng(&self.spec, CHUNK, &mut self.rng)?);
            self.next = 0;
        }
        let chunk = self.chunk.as_ref().expect("chunk refilled above");
        x.copy_from_slice(chunk.row(self.next));
        let y = chunk.label(self.next);
        self.next += 1;
        Ok(y)
    }
}

/// Uniform sampling with replacement from a fixed dataset.
#[derive(Debug, Clone)]
pub struct WithReplacement<'a> {
    ds: &'a Dataset,
    rng: ChaCha8Rng,
}

impl<'a> WithReplacement<'a> {
    pub fn new(ds: &'a Dataset, seed: u64) -> Self {
        WithReplacement { ds, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Sampler for WithReplacement<'_> {
    fn dim(&self) -> usize {
        self.ds.d()
    }

    fn mode(&self) -> SamplerMode {
        SamplerMode::WithReplacement
    }

    fn draw(&mut self, x: &mut [f64]) -> Result<Label> {
        check_dim(self.ds.d(), x.len())?;
        let i = self.rng.random_range(0..self.ds.n());
        x.copy_from_slice(self.ds.row(i));
        Ok(self.ds.label(i))
    }
}

impl<S: Sampler + ?Sized> Sampler for &mut S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn mode(&self) -> SamplerMode {
        (**self).mode()
    }

    fn draw(&mut self, x: &mut [f64]) -> Result<Label> {
        (**self).draw(x)
    }
}
