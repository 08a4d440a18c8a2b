//! Device calibration catalogs.
//!
//! A catalog lists qubit pairs with per-qubit calibrations and the pair
//! averages that feed [`ibm_device_noise`](crate::channels::ibm_device_noise).
//! A default catalog for five IBM Quantum qubit pairs is bundled.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channels::DeviceParams;
use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../data/ibm_devices.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub qubit: u32,
    #[serde(flatten)]
    pub params: DeviceParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceEntry {
    /// Lookup key such as `valencia[0,1]`.
    pub key: String,
    pub device: String,
    pub qubits: [u32; 2],
    #[serde(default)]
    pub per_qubit: Vec<QubitCalibration>,
    pub average: DeviceParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceCatalog {
    pub version: u32,
    pub devices: Vec<DeviceEntry>,
}

impl DeviceCatalog {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled device catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cat: Self = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("device catalog: {e}")))?;
        for d in &cat.devices {
            d.average.validate()?;
        }
        Ok(cat)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Case-insensitive, whitespace-insensitive key lookup.
    pub fn get(&self, key: &str) -> Result<&DeviceEntry> {
        let norm = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
        let want = norm(key);
        self.devices
            .iter()
            .find(|d| norm(&d.key) == want)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown device key '{key}'")))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.devices.iter().map(|d| d.key.as_str())
    }
}
