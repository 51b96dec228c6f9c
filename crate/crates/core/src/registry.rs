//! Name-keyed factories for the pluggable pieces: mirror maps, delay
//! strategies and noise models. Configs refer to variants by name only.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::attack::{AttackConfig, BurstDelay, ConstantDelay, DelayStrategy, NoDelay, UniformRandomDelay};
use crate::error::{Error, Result};
use crate::latency::{BoundedUniform, NoiseModel, TruncatedGaussian};
use crate::mirror::{Entropic, Euclidean, MirrorMap, SimplexProduct};

pub type Factory<T, P> = fn(&P) -> Result<Box<T>>;

/// Factories for one family of trait objects, built from parameters `P`.
pub struct Registry<T: ?Sized, P> {
    family: &'static str,
    factories: BTreeMap<&'static str, Factory<T, P>>,
}

impl<T: ?Sized, P> Registry<T, P> {
    pub fn new(family: &'static str) -> Self {
        Registry {
            family,
            factories: BTreeMap::new(),
        }
    }

    /// Adds or replaces the factory for `name`.
    pub fn register(&mut self, name: &'static str, factory: Factory<T, P>) -> &mut Self {
        self.factories.insert(name, factory);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, name: &str, params: &P) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(factory) => factory(params),
            None => Err(Error::UnknownStrategy {
                family: self.family,
                name: name.to_string(),
                known: self.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }
}

impl<T: ?Sized, P> std::fmt::Debug for Registry<T, P> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("family", &self.family)
            .field("names", &self.factories.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// The three registries used by experiments.
#[derive(Debug)]
pub struct Strategies {
    pub mirror_maps: Registry<dyn MirrorMap, SimplexProduct>,
    pub delays: Registry<dyn DelayStrategy, AttackConfig>,
    pub noise_models: Registry<dyn NoiseModel, ()>,
}

fn burst(config: &AttackConfig) -> Result<Box<dyn DelayStrategy>> {
    let need = |field: Option<usize>, name: &str| {
        field.ok_or_else(|| Error::config(format!("/attack/{name}"), "burst strategy needs this field"))
    };
    Ok(Box::new(BurstDelay {
        start: need(config.start, "start")?,
        len: need(config.len, "len")?,
        d_max: config.require_d()?,
    }))
}

impl Strategies {
    pub fn builtin() -> Self {
        let mut mirror_maps: Registry<dyn MirrorMap, SimplexProduct> = Registry::new("mirror map");
        mirror_maps
            .register("entropic", |domain| Ok(Box::new(Entropic::new(domain.clone()))))
            .register("euclidean", |domain| Ok(Box::new(Euclidean::new(domain.clone()))));

        let mut delays: Registry<dyn DelayStrategy, AttackConfig> = Registry::new("delay strategy");
        delays
            .register("none", |_| Ok(Box::new(NoDelay)))
            .register("constant", |c| Ok(Box::new(ConstantDelay { d: c.require_d()? })))
            .register("uniform-random", |c| {
                Ok(Box::new(UniformRandomDelay { d_max: c.require_d()? }))
            })
            .register("burst", burst);

        let mut noise_models: Registry<dyn NoiseModel, ()> = Registry::new("noise model");
        noise_models
            .register("bounded-uniform", |_| Ok(Box::new(BoundedUniform)))
            .register("truncated-gaussian", |_| Ok(Box::new(TruncatedGaussian)));

        Strategies {
            mirror_maps,
            delays,
            noise_models,
        }
    }

    pub fn mirror_map(&self, name: &str, domain: &SimplexProduct) -> Result<Box<dyn MirrorMap>> {
        self.mirror_maps.build(name, domain)
    }

    pub fn delay(&self, config: &AttackConfig) -> Result<Box<dyn DelayStrategy>> {
        self.delays.build(&config.strategy, config)
    }

    pub fn noise_model(&self, name: &str) -> Result<Arc<dyn NoiseModel>> {
        self.noise_models.build(name, &()).map(Arc::from)
    }
}

impl Default for Strategies {
    fn default() -> Self {
        Self::builtin()
    }
}
