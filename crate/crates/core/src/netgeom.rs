//! Deployment geometry: scenario parameters, seeded placement of users and
//! blockages, and 2D blockage tests.
//!
//! Users are placed in fixed-K mode by default (a PPP conditioned on exactly
//! `num_ues` points, i.e. i.i.d. uniform in the square). Blockages follow a
//! PPP with `blockage_density` per km², exponential length/width and uniform
//! orientation. Coordinates are meters, with the ground square spanning
//! `[0, area_side]²`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Scenario parameters. Serialized as a flat JSON object; unknown keys are
/// rejected and every field is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub bs_position: [f64; 3],
    pub ris_position: [f64; 3],
    pub area_side: f64,
    pub n_bs_antennas: usize,
    /// RIS side length in elements; the surface holds `ris_side²` elements.
    pub ris_side: usize,
    pub num_ues: usize,
    /// Users per km².
    pub ue_density: f64,
    /// Blockages per km².
    pub blockage_density: f64,
    pub blockage_mean_length: f64,
    pub blockage_mean_width: f64,
    /// GHz.
    pub carrier_freq: f64,
    /// Hz.
    pub bandwidth: f64,
    /// dBm.
    pub tx_power: f64,
    /// dBm.
    pub noise_power: f64,
    /// dB.
    pub shadow_sigma: f64,
    pub ue_height: f64,
    pub bs_height: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl ScenarioConfig {
    /// Full-size deployment: 20×20 RIS, 4 BS antennas, 28 GHz, 50 MHz.
    pub fn full() -> Self {
        Self {
            bs_position: [0.0, 0.0, 10.0],
            ris_position: [25.0, 25.0, 10.0],
            area_side: 100.0,
            n_bs_antennas: 4,
            ris_side: 20,
            num_ues: 3,
            ue_density: 150.0,
            blockage_density: 10.0,
            blockage_mean_length: 15.0,
            blockage_mean_width: 15.0,
            carrier_freq: 28.0,
            bandwidth: 50e6,
            tx_power: 35.0,
            noise_power: -84.0,
            shadow_sigma: 4.0,
            ue_height: 1.5,
            bs_height: 10.0,
        }
    }

    /// Small profile for minutes-scale experiments: K=3, N=4, 8×8 RIS.
    pub fn desk() -> Self {
        Self {
            ris_side: 8,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: impl Into<String>) -> Result<()> {
            Err(Error::InvalidConfig {
                field,
                reason: reason.into(),
            })
        }
        let finite3 = |p: &[f64; 3]| p.iter().all(|v| v.is_finite());
        if !finite3(&self.bs_position) {
            return bad("bs_position", "coordinates must be finite");
        }
        if !finite3(&self.ris_position) {
            return bad("ris_position", "coordinates must be finite");
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return bad("area_side", "must be > 0");
        }
        if self.n_bs_antennas < 1 {
            return bad("n_bs_antennas", "must be >= 1");
        }
        if self.ris_side < 1 {
            return bad("ris_side", "must be >= 1");
        }
        if self.num_ues < 1 {
            return bad("num_ues", "must be >= 1");
        }
        if !(self.ue_density >= 0.0 && self.ue_density.is_finite()) {
            return bad("ue_density", "must be >= 0");
        }
        if !(self.blockage_density >= 0.0 && self.blockage_density.is_finite()) {
            return bad("blockage_density", "must be >= 0");
        }
        if !(self.blockage_mean_length > 0.0) {
            return bad("blockage_mean_length", "must be > 0");
        }
        if !(self.blockage_mean_width > 0.0) {
            return bad("blockage_mean_width", "must be > 0");
        }
        if !(self.carrier_freq > 0.0 && self.carrier_freq.is_finite()) {
            return bad("carrier_freq", "must be > 0");
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return bad("bandwidth", "must be > 0");
        }
        if !self.tx_power.is_finite() {
            return bad("tx_power", "must be finite");
        }
        if !self.noise_power.is_finite() {
            return bad("noise_power", "must be finite");
        }
        if !(self.shadow_sigma >= 0.0 && self.shadow_sigma.is_finite()) {
            return bad("shadow_sigma", "must be >= 0");
        }
        // Breakpoint distance needs antenna heights above the 1 m environment height.
        if !(self.ue_height > 1.0) {
            return bad("ue_height", "must be > 1 m");
        }
        if !(self.bs_height > 1.0) {
            return bad("bs_height", "must be > 1 m");
        }
        if !(self.ris_position[2] > 1.0) {
            return bad("ris_position", "height must be > 1 m");
        }
        Ok(())
    }

    /// Number of RIS elements, `L²`.
    pub fn ris_elements(&self) -> usize {
        self.ris_side * self.ris_side
    }

    pub fn area_km2(&self) -> f64 {
        self.area_side * self.area_side * 1e-6
    }

    pub fn tx_power_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_power)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Rectangular ground-plane obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blockage {
    pub center: [f64; 2],
    pub length: f64,
    pub width: f64,
    /// Rotation of the length axis from +x, radians.
    pub orientation: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Deployment {
    pub ue_positions: Vec<[f64; 3]>,
    pub blockages: Vec<Blockage>,
}

impl Deployment {
    pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            ue_positions: deploy_ues(config, seed)?,
            blockages: deploy_blockages(config, seed)?,
        })
    }
}

/// Fixed-K user placement: exactly `num_ues` points uniform in the area.
pub fn deploy_ues(config: &ScenarioConfig, seed: u64) -> Result<Vec<[f64; 3]>> {
    config.validate()?;
    let mut rng = rng::stream(seed, rng::STREAM_UES);
    Ok(uniform_points(&mut rng, config, config.num_ues))
}

/// Free PPP placement: the count is Poisson(`ue_density` × area). Provided
/// for statistics; the learning pipeline needs a constant K.
pub fn deploy_ues_ppp(config: &ScenarioConfig, seed: u64) -> Result<Vec<[f64; 3]>> {
    config.validate()?;
    let mut rng = rng::stream(seed, rng::STREAM_UES);
    let count = poisson_count(&mut rng, config.ue_density * config.area_km2());
    Ok(uniform_points(&mut rng, config, count))
}

fn uniform_points(rng: &mut impl Rng, config: &ScenarioConfig, count: usize) -> Vec<[f64; 3]> {
    (0..count)
        .map(|_| {
            let x = rng.random::<f64>() * config.area_side;
            let y = rng.random::<f64>() * config.area_side;
            [x, y, config.ue_height]
        })
        .collect()
}

fn poisson_count(rng: &mut impl Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
    draw as usize
}

pub fn deploy_blockages(config: &ScenarioConfig, seed: u64) -> Result<Vec<Blockage>> {
    config.validate()?;
    let mut rng = rng::stream(seed, rng::STREAM_BLOCKAGES);
    let count = poisson_count(&mut rng, config.blockage_density * config.area_km2());
    let length = Exp::new(1.0 / config.blockage_mean_length).expect("positive mean");
    let width = Exp::new(1.0 / config.blockage_mean_width).expect("positive mean");
    Ok((0..count)
        .map(|_| Blockage {
            center: [
                rng.random::<f64>() * config.area_side,
                rng.random::<f64>() * config.area_side,
            ],
            length: length.sample(&mut rng),
            width: width.sample(&mut rng),
            orientation: rng.random::<f64>() * std::f64::consts::PI,
        })
        .collect())
}

/// True when the ground projection of the segment `tx → rx` crosses any blockage.
pub fn is_blocked(tx: [f64; 3], rx: [f64; 3], blockages: &[Blockage]) -> bool {
    blockages
        .iter()
        .any(|b| segment_hits_rectangle([tx[0], tx[1]], [rx[0], rx[1]], b))
}

/// Slab clipping in the rectangle's own frame.
fn segment_hits_rectangle(a: [f64; 2], b: [f64; 2], rect: &Blockage) -> bool {
    let (s, c) = rect.orientation.sin_cos();
    let to_local = |p: [f64; 2]| {
        let dx = p[0] - rect.center[0];
        let dy = p[1] - rect.center[1];
        [c * dx + s * dy, -s * dx + c * dy]
    };
    let p0 = to_local(a);
    let p1 = to_local(b);
    let half = [rect.length / 2.0, rect.width / 2.0];

    let mut t_min = 0.0f64;
    let mut t_max = 1.0f64;
    for axis in 0..2 {
        let d = p1[axis] - p0[axis];
        if d.abs() < 1e-15 {
            if p0[axis].abs() > half[axis] {
                return false;
            }
            continue;
        }
        let mut t0 = (-half[axis] - p0[axis]) / d;
        let mut t1 = (half[axis] - p0[axis]) / d;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_min = t_min.max(t0);
        t_max = t_max.min(t1);
        if t_min > t_max {
            return false;
        }
    }
    true
}
