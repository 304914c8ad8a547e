use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::{Error, Real, Result};

/// Calibrated near-field LED.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointLight<T> {
    pub position: Vec3<T>,
    /// Unit principal direction of the emission cone.
    pub direction: Vec3<T>,
    /// Intrinsic brightness, `> 0`.
    pub brightness: T,
    /// Angular dissipation exponent, `>= 0`.
    pub angular_dissipation: T,
}

impl<T: Real> PointLight<T> {
    pub fn new(position: Vec3<T>, direction: Vec3<T>, brightness: T, angular_dissipation: T) -> Result<Self> {
        if !position.is_finite() || !direction.is_finite() {
            return Err(Error::InvalidInput("light position and direction must be finite".into()));
        }
        if (direction.norm() - T::one()).abs() > T::of(1e-9).max(T::tiny()) {
            return Err(Error::InvalidInput("light direction must be a unit vector".into()));
        }
        if !(brightness > T::zero()) {
            return Err(Error::InvalidInput("light brightness must be positive".into()));
        }
        if !(angular_dissipation >= T::zero()) {
            return Err(Error::InvalidInput("angular dissipation must be non-negative".into()));
        }
        Ok(Self { position, direction, brightness, angular_dissipation })
    }

    /// Light aimed at `target`.
    pub fn aimed(position: Vec3<T>, target: Vec3<T>, brightness: T, angular_dissipation: T) -> Result<Self> {
        let dir = (target - position)
            .try_normalized()
            .ok_or_else(|| Error::InvalidInput("light target coincides with its position".into()))?;
        Self::new(position, dir, brightness, angular_dissipation)
    }
}
