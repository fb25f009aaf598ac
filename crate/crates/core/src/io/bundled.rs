//! Configs shipped with the crate.

use crate::error::{Error, Result};
use crate::io::config::{load_str, LoadedSystem};
use crate::scalar::Real;

const PARTICLE: &str = include_str!("../../configs/particle.cfg");
const DISK: &str = include_str!("../../configs/disk.cfg");

/// Names accepted by [`load`] and [`source`].
pub const NAMES: [&str; 2] = ["particle", "disk"];

/// Config text of a bundled system; accepts `particle` or `particle.cfg`.
pub fn source(name: &str) -> Option<&'static str> {
    match name.strip_suffix(".cfg").unwrap_or(name) {
        "particle" => Some(PARTICLE),
        "disk" => Some(DISK),
        _ => None,
    }
}

pub fn load(name: &str) -> Result<LoadedSystem<f64>> {
    load_as(name)
}

pub fn load_as<T: Real>(name: &str) -> Result<LoadedSystem<T>> {
    let src = source(name).ok_or_else(|| Error::Config(format!("no bundled config named `{name}`")))?;
    load_str(src)
}
